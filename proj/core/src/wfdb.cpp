#include "ecgaug/wfdb.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ecgaug/error.hpp"

namespace ecgaug::wfdb {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void fail(int line_no, const std::string& what) {
    throw ParseError("header line " + std::to_string(line_no) + ": " + what);
}

long parse_long(const std::string& s, int line_no, const char* what) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(line_no, std::string("bad ") + what + " '" + s + "'");
    return v;
}

std::vector<uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// MIT annotation type codes -> display symbols (beat types only; everything
// else is a non-beat annotation the segmenter never sees).
struct CodeSym {
    int code;
    char sym;
};
constexpr CodeSym kBeatCodes[] = {
    {1, 'N'},  {2, 'L'},  {3, 'R'},  {4, 'a'},  {5, 'V'},  {6, 'F'},  {7, 'J'},
    {8, 'A'},  {9, 'S'},  {10, 'E'}, {11, 'j'}, {12, '/'}, {13, 'Q'}, {25, 'B'},
    {30, '?'}, {31, '!'}, {34, 'e'}, {35, 'n'}, {37, 'x'}, {38, 'f'}, {41, 'r'},
};

constexpr int kSkip = 59, kNum = 60, kSub = 61, kChn = 62, kAux = 63;

} // namespace

char beat_symbol(int code) {
    for (const auto& cs : kBeatCodes)
        if (cs.code == code) return cs.sym;
    return 0;
}

HeaderInfo parse_header(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    HeaderInfo hdr;
    bool have_record_line = false;
    int signals_seen = 0;

    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto tok = split_ws(trimmed);

        if (!have_record_line) {
            if (tok.size() < 2) fail(line_no, "record line needs '<name> <n_sig> [fs [n_samples]]'");
            // record name may carry a /segments suffix; record id is the stem
            hdr.record_id = tok[0].substr(0, tok[0].find('/'));
            hdr.n_channels = static_cast<int>(parse_long(tok[1], line_no, "signal count"));
            if (hdr.n_channels < 0) fail(line_no, "negative signal count");
            if (tok.size() >= 3) {
                // sampling rate may carry /counter_freq(counter_base)
                std::string fs = tok[2].substr(0, tok[2].find('/'));
                try {
                    hdr.sampling_rate = std::stod(fs);
                } catch (...) {
                    fail(line_no, "bad sampling rate '" + tok[2] + "'");
                }
                if (hdr.sampling_rate <= 0) fail(line_no, "non-positive sampling rate");
            }
            if (tok.size() >= 4) hdr.n_samples = parse_long(tok[3], line_no, "sample count");
            have_record_line = true;
            continue;
        }

        if (signals_seen >= hdr.n_channels) fail(line_no, "more signal lines than declared channels");
        if (tok.size() < 2) fail(line_no, "signal line needs at least '<file> <format>'");
        ChannelInfo ch;
        ch.file = tok[0];

        // format may carry xSAMPLES, :SREW or +OFFSET suffixes; reject them
        // along with any format other than 212.
        std::string fmt = tok[1];
        size_t mod = fmt.find_first_of("x:+");
        std::string fmt_num = fmt.substr(0, mod);
        long fmt_code = parse_long(fmt_num, line_no, "format code");
        if (fmt_code != 212)
            fail(line_no, "unsupported signal format " + std::to_string(fmt_code) +
                              " (only 212 is supported)");
        if (mod != std::string::npos) fail(line_no, "format modifiers are not supported");
        ch.format = 212;

        int adc_zero = 0;
        bool explicit_baseline = false;
        if (tok.size() >= 3) {
            // ADCGAIN[(BASELINE)][/UNITS]
            std::string g = tok[2];
            size_t slash = g.find('/');
            if (slash != std::string::npos) {
                ch.units = g.substr(slash + 1);
                g = g.substr(0, slash);
            }
            size_t paren = g.find('(');
            if (paren != std::string::npos) {
                size_t close = g.find(')', paren);
                if (close == std::string::npos) fail(line_no, "unterminated baseline '(' ");
                ch.baseline = static_cast<int>(
                    parse_long(g.substr(paren + 1, close - paren - 1), line_no, "baseline"));
                explicit_baseline = true;
                g = g.substr(0, paren);
            }
            try {
                ch.gain = std::stod(g);
            } catch (...) {
                fail(line_no, "bad gain '" + tok[2] + "'");
            }
            if (ch.gain == 0) ch.gain = 200.0; // WFDB convention: 0 means default
        }
        if (tok.size() >= 5) adc_zero = static_cast<int>(parse_long(tok[4], line_no, "ADC zero"));
        if (!explicit_baseline) ch.baseline = adc_zero;
        if (tok.size() >= 9) {
            // description is the tail of the line, may contain spaces
            std::string rest;
            for (size_t i = 8; i < tok.size(); ++i) {
                if (!rest.empty()) rest += ' ';
                rest += tok[i];
            }
            ch.description = rest;
        }
        hdr.channels.push_back(std::move(ch));
        ++signals_seen;
    }

    if (!have_record_line) throw ParseError("header: missing record line");
    if (signals_seen != hdr.n_channels)
        throw ParseError("header: declared " + std::to_string(hdr.n_channels) +
                         " channels but found " + std::to_string(signals_seen) + " signal lines");
    return hdr;
}

std::vector<std::vector<int>> decode_212(std::span<const uint8_t> bytes, int n_channels) {
    if (n_channels != 1 && n_channels != 2)
        throw ParseError("decode_212: supports 1 or 2 channels, got " + std::to_string(n_channels));
    if (bytes.size() % 3 != 0)
        throw ParseError("decode_212: truncated triplet at byte offset " +
                         std::to_string(bytes.size() - bytes.size() % 3));

    auto sign12 = [](int v) { return (v & 0x800) ? v - 4096 : v; };
    std::vector<std::vector<int>> out(static_cast<size_t>(n_channels));
    size_t triplets = bytes.size() / 3;
    for (auto& ch : out) ch.reserve(n_channels == 2 ? triplets : triplets * 2);

    for (size_t t = 0; t < triplets; ++t) {
        uint8_t b0 = bytes[3 * t], b1 = bytes[3 * t + 1], b2 = bytes[3 * t + 2];
        int s1 = sign12(b0 | ((b1 & 0x0F) << 8));
        int s2 = sign12(b2 | ((b1 & 0xF0) << 4));
        if (n_channels == 2) {
            out[0].push_back(s1);
            out[1].push_back(s2);
        } else {
            out[0].push_back(s1);
            out[0].push_back(s2);
        }
    }
    return out;
}

std::vector<uint8_t> encode_212(std::span<const int> ch0, std::span<const int> ch1) {
    if (ch0.size() != ch1.size()) throw ParseError("encode_212: channel length mismatch");
    std::vector<uint8_t> out;
    out.reserve(ch0.size() * 3);
    for (size_t i = 0; i < ch0.size(); ++i) {
        int a = ch0[i], b = ch1[i];
        if (a < -2048 || a > 2047 || b < -2048 || b > 2047)
            throw ParseError("encode_212: sample outside 12-bit range at index " + std::to_string(i));
        unsigned ua = static_cast<unsigned>(a) & 0xFFF;
        unsigned ub = static_cast<unsigned>(b) & 0xFFF;
        out.push_back(static_cast<uint8_t>(ua & 0xFF));
        out.push_back(static_cast<uint8_t>(((ua >> 8) & 0x0F) | (((ub >> 8) & 0x0F) << 4)));
        out.push_back(static_cast<uint8_t>(ub & 0xFF));
    }
    return out;
}

AnnotationStream parse_annotations(std::span<const uint8_t> bytes) {
    AnnotationStream out;
    int64_t time = 0;
    size_t pos = 0;
    bool saw_eof = false;

    auto next_word = [&]() -> uint16_t {
        if (pos + 2 > bytes.size()) throw ParseError("annotations: truncated word at byte " + std::to_string(pos));
        uint16_t w = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return w;
    };

    while (pos + 2 <= bytes.size()) {
        uint16_t word = next_word();
        if (word == 0) { // EOF word: code 0, delta 0
            saw_eof = true;
            break;
        }
        int code = word >> 10;
        int delta = word & 0x3FF;

        switch (code) {
        case kSkip: {
            // 4-byte signed interval, high word first, each word little-endian
            uint16_t hi = next_word();
            uint16_t lo = next_word();
            int32_t interval = static_cast<int32_t>((static_cast<uint32_t>(hi) << 16) | lo);
            time += interval;
            break;
        }
        case kNum:
        case kSub:
        case kChn:
            break; // attribute words, no time advance
        case kAux: {
            size_t skip = static_cast<size_t>(delta);
            if (skip % 2) ++skip; // aux data padded to even length
            if (pos + skip > bytes.size())
                throw ParseError("annotations: truncated aux field at byte " + std::to_string(pos));
            pos += skip;
            break;
        }
        default: {
            time += delta;
            if (time < 0)
                throw ParseError("annotations: negative cumulative time at byte " +
                                 std::to_string(pos));
            char sym = beat_symbol(code);
            if (sym != 0) {
                if (!out.empty() && time <= out.back().sample)
                    throw ParseError("annotations: non-increasing beat index " +
                                     std::to_string(time));
                out.push_back({time, sym});
            }
            break;
        }
        }
    }
    if (!saw_eof) throw ParseError("annotations: missing EOF word");
    return out;
}

SignalRecord load_record(const std::filesystem::path& header_path) {
    std::ifstream is(header_path);
    if (!is) throw IoError("cannot open " + header_path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    HeaderInfo hdr = parse_header(buf.str());

    SignalRecord rec;
    rec.record_id = hdr.record_id;
    rec.sampling_rate = hdr.sampling_rate;
    if (hdr.n_channels == 0 || hdr.n_samples == 0) {
        for (const auto& ch : hdr.channels)
            rec.channels.push_back({ch.gain, ch.baseline, ch.description, {}});
        return rec;
    }
    for (const auto& ch : hdr.channels)
        if (ch.file != hdr.channels[0].file)
            throw ParseError("load_record: multi-file signal groups are not supported");

    auto bytes = read_bytes(header_path.parent_path() / hdr.channels[0].file);
    auto streams = decode_212(bytes, hdr.n_channels);
    for (int c = 0; c < hdr.n_channels; ++c) {
        auto& s = streams[static_cast<size_t>(c)];
        if (static_cast<int64_t>(s.size()) < hdr.n_samples)
            throw ParseError("load_record: signal file has " + std::to_string(s.size()) +
                             " samples, header declares " + std::to_string(hdr.n_samples));
        s.resize(static_cast<size_t>(hdr.n_samples));
        rec.channels.push_back(
            {hdr.channels[static_cast<size_t>(c)].gain, hdr.channels[static_cast<size_t>(c)].baseline,
             hdr.channels[static_cast<size_t>(c)].description, std::move(s)});
    }
    return rec;
}

AnnotationStream load_annotations(const std::filesystem::path& atr_path) {
    auto bytes = read_bytes(atr_path);
    return parse_annotations(bytes);
}

std::vector<double> to_millivolts(const SignalRecord& rec, int channel) {
    if (channel < 0 || channel >= static_cast<int>(rec.channels.size()))
        throw Error("to_millivolts: channel " + std::to_string(channel) + " of " +
                    std::to_string(rec.channels.size()));
    const SignalChannel& ch = rec.channels[static_cast<size_t>(channel)];
    std::vector<double> mv(ch.samples.size());
    for (size_t i = 0; i < mv.size(); ++i)
        mv[i] = (static_cast<double>(ch.samples[i]) - ch.baseline) / ch.gain;
    return mv;
}

AnnotationStream map_symbols(const AnnotationStream& in, const std::set<char>& selected) {
    for (char c : selected)
        if (!canonical_classes().count(c))
            throw ConfigError(std::string("map_symbols: '") + c + "' is not one of the 7 classes");
    AnnotationStream out;
    out.reserve(in.size());
    for (const Annotation& a : in) {
        char sym = a.symbol == '/' ? 'P' : a.symbol;
        if (selected.count(sym)) out.push_back({a.sample, sym});
    }
    return out;
}

} // namespace ecgaug::wfdb
