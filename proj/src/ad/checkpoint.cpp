#include "dlf/ad/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dlf::ad {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<Record>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
  out << "dlf-checkpoint 1\n";
  char buf[64];
  for (const Record& r : records) {
    if (r.name.empty() || r.name.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("checkpoint: bad record name '" + r.name + "'");
    }
    if (element_count(r.shape) != r.values.size()) {
      throw std::invalid_argument("checkpoint: shape does not match values for " + r.name);
    }
    out << r.name << ' ' << r.shape.size();
    for (std::size_t d : r.shape) out << ' ' << d;
    out << '\n';
    for (double v : r.values) {
      std::snprintf(buf, sizeof buf, "%a\n", v);
      out << buf;
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

std::vector<Record> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "dlf-checkpoint 1") {
    throw std::runtime_error("checkpoint: bad header in " + path.string());
  }
  std::vector<Record> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream hdr(line);
    Record r;
    std::size_t rank = 0;
    if (!(hdr >> r.name >> rank)) throw std::runtime_error("checkpoint: bad record header: " + line);
    r.shape.resize(rank);
    for (auto& d : r.shape) {
      if (!(hdr >> d)) throw std::runtime_error("checkpoint: bad shape: " + line);
    }
    const std::size_t n = element_count(r.shape);
    r.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated record " + r.name);
      char* end = nullptr;
      const double v = std::strtod(line.c_str(), &end);
      if (end == line.c_str()) throw std::runtime_error("checkpoint: bad value in " + r.name);
      r.values.push_back(v);
    }
    records.push_back(std::move(r));
  }
  return records;
}

const Record& find_record(const std::vector<Record>& records, const std::string& name) {
  for (const Record& r : records) {
    if (r.name == name) return r;
  }
  throw std::runtime_error("checkpoint: missing record " + name);
}

}  // namespace dlf::ad
