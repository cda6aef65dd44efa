#include "vrnnaug/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace vrnnaug {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor record format assumes a little-endian host");

constexpr char kMagic[8] = {'V', 'R', 'N', 'T', 'N', 'S', 'R', '1'};

template <class T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("tensor record file truncated");
  return v;
}

}  // namespace

void write_tensor_records(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, Tensor>>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, static_cast<uint32_t>(records.size()));
  for (const auto& [name, t] : records) {
    write_pod(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<uint32_t>(t.rank()));
    for (int e : t.shape()) write_pod(os, static_cast<uint32_t>(e));
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<std::pair<std::string, Tensor>> read_tensor_records(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path.string() + "' is not a tensor record file");
  }
  const uint32_t count = read_pod<uint32_t>(is);
  std::vector<std::pair<std::string, Tensor>> records;
  records.reserve(count);
  for (uint32_t r = 0; r < count; ++r) {
    const uint32_t name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = read_pod<uint32_t>(is);
    Shape shape(rank);
    int64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<int>(read_pod<uint32_t>(is));
      n *= shape[i];
    }
    std::vector<double> values(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw DataError("tensor record file truncated");
    records.emplace_back(std::move(name),
                         Tensor::from(std::move(shape), std::move(values)));
  }
  return records;
}

void save_params(const ParamStore& store, const std::filesystem::path& path) {
  write_tensor_records(path, store.entries());
}

void load_params(ParamStore& store, const std::filesystem::path& path) {
  auto records = read_tensor_records(path);
  auto& entries = store.mutable_entries();
  if (records.size() != entries.size()) {
    throw DataError("checkpoint has " + std::to_string(records.size()) +
                    " records, expected " + std::to_string(entries.size()));
  }
  for (size_t i = 0; i < records.size(); ++i) {
    auto& [name, current] = entries[i];
    auto& [rec_name, rec_tensor] = records[i];
    if (rec_name != name || rec_tensor.shape() != current.shape()) {
      throw DataError("checkpoint record '" + rec_name +
                      "' does not match parameter '" + name + "'");
    }
    auto dst = current.mutable_values();
    auto src = rec_tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace vrnnaug
