#pragma once
// Model checkpoints: a line-oriented text header followed by the flat
// parameter vector as little-endian float32. Parameters are kept
// float-representable in memory, so save -> load is bit-exact.
//
//   DEVDET-CHECKPOINT 1
//   kind detector
//   architecture convnet-s64-c8.16.32.32-h32
//   seed 42
//   config_hash 0123456789abcdef
//   train_config {"learning_rate":0.0002,...}
//   param conv1.weight 8,3,3,3
//   ...
//   param_count 12345
//   end_header
//   <param_count * 4 bytes>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "devdet/detector.hpp"
#include "devdet/nn/params.hpp"

namespace devdet {

struct CheckpointInfo {
  std::string kind;  // "detector" or "generator"
  std::string architecture_id;
  std::uint64_t seed = 0;
  std::string config_hash;  // producing run config, "-" when standalone
  nlohmann::json train_config = nlohmann::json::object();
  std::vector<nn::ParamEntry> shapes;
};

struct Checkpoint {
  CheckpointInfo info;
  std::vector<double> parameters;
};

// Throws ContractError if a parameter is not exactly representable as float32.
void write_checkpoint(const std::string& path, const CheckpointInfo& info, std::span<const double> parameters);
// Throws IoError when unreadable, LoadError on a malformed header or truncated payload.
Checkpoint read_checkpoint(const std::string& path);

// kind, architecture_id and shapes are taken from the model.
void save_detector(const std::string& path, const Detector& model, CheckpointInfo info);
// Rebuilds the architecture named in the header and checks its shape table.
std::unique_ptr<Detector> load_detector(const std::string& path, CheckpointInfo* info = nullptr);

}  // namespace devdet
