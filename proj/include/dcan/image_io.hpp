#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcan/image.hpp"
#include "dcan/mask.hpp"

namespace dcan {

// Binary PPM (P6, 8-bit). Values are scaled to [0,1] on read and rounded
// back on write.
ImageRgb read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageRgb& image);

// Binary PGM (P5, 8-bit) ingested as a gray RGB image.
ImageRgb read_pgm(const std::string& path);

// `IMASK v1 <width> <height>` header then height lines of width integers.
InstanceMask read_imask(const std::string& path);
void write_imask(const std::string& path, const InstanceMask& mask);
void write_imask(const std::string& path, const BinaryMask& mask);

// `PMAP v1 <w> <h>` header then little-endian doubles: p_object plane,
// p_contour plane.
ProbabilityMaps read_pmap(const std::string& path);
void write_pmap(const std::string& path, const ProbabilityMaps& maps);

// Explicit little-endian IEEE-754 double encoding, independent of host order.
void write_le_doubles(std::ostream& out, const double* values, std::size_t count);
void read_le_doubles(std::istream& in, double* values, std::size_t count);

}  // namespace dcan
