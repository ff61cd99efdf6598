#include "devdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "devdet/error.hpp"

namespace devdet {

namespace {

constexpr const char* kMagic = "DEVDET-CHECKPOINT 1";

std::string shape_text(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s;
}

std::vector<int> parse_shape(const std::string& text, const std::string& path) {
  std::vector<int> shape;
  std::istringstream in(text);
  std::string v;
  while (std::getline(in, v, ',')) {
    try {
      std::size_t pos = 0;
      const int n = std::stoi(v, &pos);
      if (pos != v.size() || n <= 0) throw std::invalid_argument(v);
      shape.push_back(n);
    } catch (const std::exception&) {
      throw LoadError(path + ": bad parameter shape '" + text + "'");
    }
  }
  if (shape.empty()) throw LoadError(path + ": empty parameter shape");
  return shape;
}

// Splits "key rest-of-line".
std::pair<std::string, std::string> split_key(const std::string& line) {
  const auto sp = line.find(' ');
  if (sp == std::string::npos) return {line, ""};
  return {line.substr(0, sp), line.substr(sp + 1)};
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointInfo& info, std::span<const double> parameters) {
  if (!nn::float_representable(parameters))
    throw ContractError("checkpoint " + path + ": parameters are not float32-representable");
  std::size_t declared = 0;
  for (const auto& e : info.shapes) declared += e.size;
  if (declared != parameters.size())
    throw ContractError("checkpoint " + path + ": shape table declares " + std::to_string(declared) + " values, got " +
                        std::to_string(parameters.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << kMagic << '\n'
      << "kind " << info.kind << '\n'
      << "architecture " << info.architecture_id << '\n'
      << "seed " << info.seed << '\n'
      << "config_hash " << (info.config_hash.empty() ? "-" : info.config_hash) << '\n'
      << "train_config " << info.train_config.dump() << '\n';
  for (const auto& e : info.shapes) out << "param " << e.name << ' ' << shape_text(e.shape) << '\n';
  out << "param_count " << parameters.size() << '\n' << "end_header\n";

  std::vector<unsigned char> bytes(parameters.size() * 4);
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(parameters[i]));
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>((u >> (8 * b)) & 0xffu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw LoadError(path + ": not a checkpoint file");

  Checkpoint ck;
  auto& info = ck.info;
  std::size_t count = 0;
  bool have_count = false, done = false;
  nn::ParamTable table;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      done = true;
      break;
    }
    auto [key, rest] = split_key(line);
    try {
      if (key == "kind") {
        info.kind = rest;
      } else if (key == "architecture") {
        info.architecture_id = rest;
      } else if (key == "seed") {
        info.seed = std::stoull(rest);
      } else if (key == "config_hash") {
        info.config_hash = rest == "-" ? "" : rest;
      } else if (key == "train_config") {
        info.train_config = nlohmann::json::parse(rest);
      } else if (key == "param") {
        auto [name, shape] = split_key(rest);
        table.add(name, parse_shape(shape, path));
      } else if (key == "param_count") {
        count = std::stoull(rest);
        have_count = true;
      } else {
        throw LoadError(path + ": unknown header key '" + key + "'");
      }
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception& e) {
      throw LoadError(path + ": bad header line '" + line + "': " + e.what());
    }
  }
  if (!done || !have_count || info.kind.empty() || info.architecture_id.empty())
    throw LoadError(path + ": incomplete checkpoint header");
  if (table.size() != count)
    throw LoadError(path + ": shape table declares " + std::to_string(table.size()) + " values but param_count is " +
                    std::to_string(count));
  info.shapes = table.entries();

  std::vector<unsigned char> bytes(count * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw LoadError(path + ": truncated parameter payload");
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(path + ": trailing bytes after parameters");
  ck.parameters.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    ck.parameters[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  return ck;
}

void save_detector(const std::string& path, const Detector& model, CheckpointInfo info) {
  info.kind = "detector";
  info.architecture_id = model.architecture_id();
  info.shapes = model.shape_table().entries();
  write_checkpoint(path, info, model.parameters());
}

std::unique_ptr<Detector> load_detector(const std::string& path, CheckpointInfo* info) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.info.kind != "detector") throw LoadError(path + ": expected a detector checkpoint, found '" + ck.info.kind + "'");
  auto model = make_detector(ck.info.architecture_id);
  if (model->shape_table().entries() != ck.info.shapes)
    throw LoadError(path + ": shape table does not match architecture " + ck.info.architecture_id);
  model->set_parameters(ck.parameters);
  if (info) *info = std::move(ck.info);
  return model;
}

}  // namespace devdet
