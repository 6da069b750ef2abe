#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ecgaug/nn.hpp"
#include "ecgaug/tensor.hpp"

namespace ecgaug {

// Parameter checkpoint container, little-endian:
//   magic "ECGAUGPK" | u32 version | u64 count |
//   per entry: u32 name_len | name bytes | u32 rank | u64 extents[rank] |
//              f64 data[product(extents)]
// Entries cover trainable parameters and buffers (running statistics) alike.

void save_checkpoint(const std::filesystem::path& path, const std::vector<nn::ParamRef>& state);
std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into matching entries; throws on missing names or
// shape mismatches.
void restore_state(std::vector<nn::ParamRef> state, const std::filesystem::path& path);

} // namespace ecgaug
