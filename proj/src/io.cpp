#include "latentflow/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace latentflow::io {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw IoError("truncated input");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

float get_f32(std::span<const std::uint8_t> in, std::size_t& pos) { return std::bit_cast<float>(get_u32(in, pos)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_lseq(std::span<const LatentSeq> items) {
    if (items.empty()) throw InvalidArgument("encode_lseq: no items");
    const auto& first = items.front();
    std::vector<std::uint8_t> out{'L', 'S', 'E', 'Q', kLseqVersion};
    put_u32(out, static_cast<std::uint32_t>(items.size()));
    put_u32(out, static_cast<std::uint32_t>(first.length()));
    put_u32(out, static_cast<std::uint32_t>(first.channels()));
    out.reserve(out.size() + 4 * items.size() * first.size());
    for (const auto& s : items) {
        require_same_shape(first, s, "encode_lseq");
        for (double v : s.values()) put_f32(out, static_cast<float>(v));
    }
    return out;
}

std::vector<LatentSeq> decode_lseq(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 17 || std::memcmp(bytes.data(), "LSEQ", 4) != 0) throw IoError("not an LSEQ stream");
    if (bytes[4] != kLseqVersion) throw IoError("unsupported LSEQ version " + std::to_string(bytes[4]));
    std::size_t pos = 5;
    const std::uint32_t b = get_u32(bytes, pos);
    const std::uint32_t l = get_u32(bytes, pos);
    const std::uint32_t d = get_u32(bytes, pos);
    if (b == 0 || l == 0 || d == 0) throw IoError("LSEQ header has a zero dimension");
    const std::uint64_t n = std::uint64_t{b} * l * d;
    if (bytes.size() - pos != 4 * n) throw IoError("LSEQ payload size does not match header");
    std::vector<LatentSeq> out;
    out.reserve(b);
    for (std::uint32_t i = 0; i < b; ++i) {
        std::vector<double> v(std::size_t{l} * d);
        for (auto& x : v) x = get_f32(bytes, pos);
        out.emplace_back(l, d, std::move(v));
    }
    return out;
}

void write_lseq(const std::filesystem::path& path, std::span<const LatentSeq> items) {
    write_file(path, encode_lseq(items));
}

std::vector<LatentSeq> read_lseq(const std::filesystem::path& path) { return decode_lseq(read_file(path)); }

void write_lseq_csv(std::ostream& os, std::span<const LatentSeq> items) {
    if (items.empty()) throw InvalidArgument("write_lseq_csv: no items");
    const std::size_t d = items.front().channels();
    os << "item,frame";
    for (std::size_t c = 0; c < d; ++c) os << ",c" << c;
    os << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < items.size(); ++i) {
        require_same_shape(items.front(), items[i], "write_lseq_csv");
        for (std::size_t f = 0; f < items[i].length(); ++f) {
            os << i << ',' << f;
            for (std::size_t c = 0; c < d; ++c) os << ',' << items[i](f, c);
            os << '\n';
        }
    }
}

std::vector<LatentSeq> read_lseq_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty CSV");
    std::size_t d = 0;
    {
        std::stringstream hs(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(hs, cell, ',')) ++cols;
        if (cols < 3) throw IoError("CSV header needs item,frame and at least one channel");
        d = cols - 2;
    }
    std::vector<std::vector<std::vector<double>>> rows;  // item -> frame -> channel
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (vals.size() != d + 2) throw IoError("CSV line " + std::to_string(lineno) + ": wrong column count");
        const auto item = static_cast<std::size_t>(vals[0]);
        const auto frame = static_cast<std::size_t>(vals[1]);
        if (item > rows.size()) throw IoError("CSV items must be contiguous from 0");
        if (item == rows.size()) rows.emplace_back();
        if (frame != rows[item].size()) throw IoError("CSV frames must be in order");
        rows[item].emplace_back(vals.begin() + 2, vals.end());
    }
    if (rows.empty()) throw IoError("CSV has no data rows");
    std::vector<LatentSeq> out;
    for (const auto& r : rows) out.push_back(LatentSeq::from_rows(r));
    for (const auto& s : out) require_same_shape(out.front(), s, "read_lseq_csv");
    return out;
}

void write_lseq_csv(const std::filesystem::path& path, std::span<const LatentSeq> items) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    write_lseq_csv(f, items);
}

std::vector<LatentSeq> read_lseq_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    return read_lseq_csv(f);
}

std::vector<LatentSeq> read_latents(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? read_lseq_csv(path) : read_lseq(path);
}

void write_latents(const std::filesystem::path& path, std::span<const LatentSeq> items) {
    if (path.extension() == ".csv")
        write_lseq_csv(path, items);
    else
        write_lseq(path, items);
}

}  // namespace latentflow::io
