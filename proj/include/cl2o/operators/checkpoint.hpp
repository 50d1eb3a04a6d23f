#pragma once

#include "cl2o/operators/innovation.hpp"

#include <map>
#include <string>

namespace cl2o {

/// Innovation parameters plus the header needed to rebuild the operator.
/// `meta` carries free-form run information (stepsize, objective family, ...).
struct Checkpoint {
  InnovationConfig config;
  ParamVector theta;
  std::map<std::string, std::string> meta;
};

inline constexpr char kFeatureLayout[] = "x,g,u_prev,f";

/// Binary layout (little-endian): "CL2C", u16 version, u16 activation,
/// i64 n, r, d, hidden, f64 gamma, input_scale, string feature layout,
/// u32 segment count, per segment (string name, i64 rows, cols),
/// u64 entry count, f64 entries, u32 meta count, (string key, string value)*.
/// Strings are u32 length + bytes.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace cl2o
