#include "taas/checkpoint.hpp"

#include <bit>
#include <cctype>
#include <fstream>
#include <sstream>

#include "taas/error.hpp"

namespace taas {

namespace {

constexpr const char* kMagic = "taas-checkpoint v1";

void write_f64_le(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double read_f64_le(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  if (!in) throw config_error("checkpoint truncated inside value payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     std::uint64_t seed) {
  for (const auto& p : params) {
    for (char c : p.name) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        throw std::invalid_argument("parameter name contains whitespace: " + p.name);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open checkpoint for writing: " + path);
  out << kMagic << "\n";
  out << "seed " << seed << "\n";
  out << "params " << params.size() << "\n";
  for (const auto& p : params) {
    out << "param " << p.name << " " << p.value.rows << " " << p.value.cols << " "
        << p.step_count << "\n";
  }
  out << "payload\n";
  for (const auto& p : params) {
    for (double v : p.value.data) write_f64_le(out, v);
  }
  if (!out) throw config_error("write failed for checkpoint: " + path);
}

std::uint64_t load_checkpoint(const std::string& path, ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw config_error("not a recognized checkpoint file: " + path);
  }
  std::uint64_t seed = 0;
  std::size_t count = 0;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> seed) || key != "seed") {
      throw config_error("checkpoint manifest missing seed line");
    }
  }
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> count) || key != "params") {
      throw config_error("checkpoint manifest missing params line");
    }
  }
  if (count != params.size()) {
    throw config_error("checkpoint lists " + std::to_string(count) +
                       " parameters but the model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw config_error("checkpoint manifest truncated");
    std::istringstream ls(line);
    std::string key, name;
    std::size_t rows = 0, cols = 0;
    std::int64_t steps = 0;
    if (!(ls >> key >> name >> rows >> cols >> steps) || key != "param") {
      throw config_error("bad manifest line: " + line);
    }
    Parameter& p = params[i];
    if (name != p.name) {
      throw config_error("checkpoint parameter '" + name + "' does not match model parameter '" +
                         p.name + "' at position " + std::to_string(i));
    }
    if (rows != p.value.rows || cols != p.value.cols) {
      throw config_error("checkpoint shape " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " for '" + name + "' does not match model " +
                         p.value.shape_str());
    }
    p.step_count = steps;
  }
  if (!std::getline(in, line) || line != "payload") {
    throw config_error("checkpoint manifest missing payload marker");
  }
  for (auto& p : params) {
    for (double& v : p.value.data) v = read_f64_le(in);
  }
  return seed;
}

}  // namespace taas
