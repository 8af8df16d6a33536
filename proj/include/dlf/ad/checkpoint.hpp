#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dlf::ad {

/// One named parameter array.
struct Record {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// Text layout, one record after another:
///
///   dlf-checkpoint 1
///   <name> <rank> <dim0> ... <dimN-1>
///   <value as C99 hex float>        (one per line, product(dims) lines)
///
/// Hex floats make the round trip bit-exact.
void write_checkpoint(const std::filesystem::path& path, const std::vector<Record>& records);
std::vector<Record> read_checkpoint(const std::filesystem::path& path);

const Record& find_record(const std::vector<Record>& records, const std::string& name);

}  // namespace dlf::ad
