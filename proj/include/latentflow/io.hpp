#pragma once

// Latent sequence persistence.
//
// Binary LSEQ layout (all little-endian):
//   bytes 0..3   "LSEQ"
//   byte  4      version (1)
//   u32          B  item count
//   u32          L  frames per item
//   u32          d  channels per frame
//   f32[B*L*d]   values, item-major then row-major (frame, channel)
//
// CSV layout: header "item,frame,c0,...,c{d-1}", then one row per frame.

#include "latentflow/core.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace latentflow::io {

inline constexpr std::uint8_t kLseqVersion = 1;

std::vector<std::uint8_t> encode_lseq(std::span<const LatentSeq> items);
std::vector<LatentSeq> decode_lseq(std::span<const std::uint8_t> bytes);

void write_lseq(const std::filesystem::path& path, std::span<const LatentSeq> items);
std::vector<LatentSeq> read_lseq(const std::filesystem::path& path);

void write_lseq_csv(std::ostream& os, std::span<const LatentSeq> items);
std::vector<LatentSeq> read_lseq_csv(std::istream& is);

void write_lseq_csv(const std::filesystem::path& path, std::span<const LatentSeq> items);
std::vector<LatentSeq> read_lseq_csv(const std::filesystem::path& path);

/// Reads either format; CSV is selected by a ".csv" extension.
std::vector<LatentSeq> read_latents(const std::filesystem::path& path);
void write_latents(const std::filesystem::path& path, std::span<const LatentSeq> items);

// Little-endian helpers shared with the checkpoint format.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos);
float get_f32(std::span<const std::uint8_t> in, std::size_t& pos);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace latentflow::io
