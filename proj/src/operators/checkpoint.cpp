#include "cl2o/operators/checkpoint.hpp"

#include "cl2o/data/binary_io.hpp"

namespace cl2o {

namespace {
constexpr char kMagic[4] = {'C', 'L', '2', 'C'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const InnovationConfig& c = ckpt.config;
  if (!(ckpt.theta.layout() == innovation_layout(c))) {
    throw InvalidArgument("checkpoint: parameter layout does not match the operator configuration");
  }
  bin::Writer w;
  w.raw(kMagic, 4);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint16_t>(c.activation == StateActivation::Tanh ? 0 : 1);
  w.put<std::int64_t>(c.n);
  w.put<std::int64_t>(c.r);
  w.put<std::int64_t>(c.d);
  w.put<std::int64_t>(c.hidden);
  w.put<double>(c.gamma);
  w.put<double>(c.input_scale);
  w.str(kFeatureLayout);
  const auto& segs = ckpt.theta.layout().segments();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(segs.size()));
  for (const Segment& s : segs) {
    w.str(s.name);
    w.put<std::int64_t>(s.rows);
    w.put<std::int64_t>(s.cols);
  }
  const Vector& e = ckpt.theta.entries();
  w.put<std::uint64_t>(static_cast<std::uint64_t>(e.size()));
  for (Index i = 0; i < e.size(); ++i) w.put<double>(e[i]);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  return w.bytes();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  bin::Reader r(bytes, "checkpoint");
  if (r.raw(4) != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic (expected CL2C)");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  InnovationConfig& c = ckpt.config;
  const auto act = r.get<std::uint16_t>();
  if (act > 1) throw FormatError("checkpoint: unknown state activation");
  c.activation = act == 0 ? StateActivation::Tanh : StateActivation::Identity;
  c.n = r.get<std::int64_t>();
  c.r = r.get<std::int64_t>();
  c.d = r.get<std::int64_t>();
  c.hidden = r.get<std::int64_t>();
  c.gamma = r.get<double>();
  c.input_scale = r.get<double>();
  if (r.str() != kFeatureLayout) throw FormatError("checkpoint: unsupported feature layout");
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  const ParamLayout expected = innovation_layout(c);
  const auto nseg = r.get<std::uint32_t>();
  ParamLayout layout;
  for (std::uint32_t i = 0; i < nseg; ++i) {
    std::string name = r.str();
    const auto rows = r.get<std::int64_t>();
    const auto cols = r.get<std::int64_t>();
    layout.add(std::move(name), rows, cols);
  }
  if (!(layout == expected)) throw FormatError("checkpoint: segment table does not match header");
  const auto count = r.get<std::uint64_t>();
  if (count != static_cast<std::uint64_t>(layout.size())) throw FormatError("checkpoint: entry count mismatch");
  Vector e(static_cast<Index>(count));
  for (Index i = 0; i < e.size(); ++i) e[i] = r.get<double>();
  ckpt.theta = ParamVector(layout, e);
  const auto nmeta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    ckpt.meta[k] = r.str();
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  bin::write_file_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(bin::read_file_bytes(path)); }

}  // namespace cl2o
