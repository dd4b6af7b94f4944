#include "mdma/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "mdma/errors.hpp"

namespace mdma {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw InvalidArgument("truncated model file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_model(std::ostream& out, const MdmaModel& model) {
  out.write(kArchiveMagic, sizeof(kArchiveMagic));
  put<std::uint32_t>(out, kArchiveVersion);
  const ModelDims& dims = model.dims();
  for (int v : {dims.d, dims.m, dims.depth, dims.width, dims.pool_size}) put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  for (int v : model.leaf_order()) put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  put<std::uint64_t>(out, model.params().size());
  for (double p : model.params()) put<double>(out, p);
  if (!out) throw NumericalError("failed to write model");
}

void save_model(const std::string& path, const MdmaModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  save_model(out, model);
}

MdmaModel load_model(std::istream& in) {
  char magic[sizeof(kArchiveMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0)
    throw InvalidArgument("not a model file");
  const auto version = get<std::uint32_t>(in);
  if (version != kArchiveVersion)
    throw InvalidArgument("unsupported model file version " + std::to_string(version));
  ModelDims dims;
  dims.d = static_cast<int>(get<std::uint32_t>(in));
  dims.m = static_cast<int>(get<std::uint32_t>(in));
  dims.depth = static_cast<int>(get<std::uint32_t>(in));
  dims.width = static_cast<int>(get<std::uint32_t>(in));
  dims.pool_size = static_cast<int>(get<std::uint32_t>(in));
  if (dims.d < 1 || dims.d > 1 << 20 || dims.m < 1 || dims.m > 1 << 16)
    throw InvalidArgument("corrupt model header");
  std::vector<int> order(dims.d);
  for (auto& v : order) v = static_cast<int>(get<std::uint32_t>(in));
  const auto count = get<std::uint64_t>(in);
  if (count != model_param_count(dims)) throw InvalidArgument("model file parameter count mismatch");
  std::vector<double> params(count);
  for (auto& p : params) p = get<double>(in);
  return MdmaModel(dims, std::move(order), std::move(params));
}

MdmaModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace mdma
