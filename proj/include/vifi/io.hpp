#pragma once

#include "vifi/error.hpp"
#include "vifi/imgrid.hpp"
#include "vifi/scene.hpp"

#include <filesystem>
#include <string>

namespace vifi {

/// Portable float map: "Pf" (1 channel) or "PF" (3 channels), scale -1.0
/// (little-endian), rows stored bottom-up as float32.
void write_pfm(const std::filesystem::path& path, const ImageGrid& grid);
ImageGrid read_pfm(const std::filesystem::path& path);

/// Binary "P6" with maxval 255; values in [0, 1] are rounded to 1/255
/// steps, one-channel grids are written as gray RGB.
void write_ppm(const std::filesystem::path& path, const ImageGrid& grid);
/// Always returns 3 channels in [0, 1].
ImageGrid read_ppm(const std::filesystem::path& path);

/// Middlebury flow: "PIEH", int32 width and height, interleaved float32
/// (dx, dy), all little-endian.
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

/// Values after a float32 round trip, as stored by PFM and .flo.
ImageGrid quantize_float(const ImageGrid& grid);
/// Values after an 8-bit round trip, as stored by PPM.
ImageGrid quantize_byte(const ImageGrid& grid);

/// Writes images (PPM), depths, merge and co-visibility masks (PFM),
/// flows (.flo) and a text manifest with K and the poses.
void write_bundle(const std::filesystem::path& dir, const Bundle& bundle);
/// Reads a bundle written by write_bundle; images come back as one
/// channel.
Bundle read_bundle(const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// printf-style "%.17g", the round-trip format of every text output.
std::string format_double(double v);

}  // namespace vifi
