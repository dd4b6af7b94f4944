#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "mdma/model.hpp"

namespace mdma {

inline constexpr char kArchiveMagic[5] = {'M', 'D', 'M', 'A', '1'};
inline constexpr std::uint32_t kArchiveVersion = 1;

/// Binary model file: magic "MDMA1", uint32 version, uint32 d, m, depth, width, pool size,
/// d uint32 leaf-order entries, uint64 parameter count, then the raw parameters as float64.
/// Everything little-endian.
void save_model(std::ostream& out, const MdmaModel& model);
void save_model(const std::string& path, const MdmaModel& model);
MdmaModel load_model(std::istream& in);
MdmaModel load_model(const std::string& path);

}  // namespace mdma
