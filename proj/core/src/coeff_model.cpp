#include "swarmflow/coeff_model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace swarmflow {

namespace {

Eigen::ArrayXXd activate(Activation a, const Eigen::ArrayXXd& x) {
  switch (a) {
    case Activation::kSilu:
      return x / (1.0 + (-x).exp());
    case Activation::kTanh:
      return x.tanh();
  }
  throw DomainError("unknown activation");
}

Eigen::ArrayXXd activate_grad(Activation a, const Eigen::ArrayXXd& x) {
  switch (a) {
    case Activation::kSilu: {
      const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-x).exp());
      return sig * (1.0 + x * (1.0 - sig));
    }
    case Activation::kTanh:
      return 1.0 - x.tanh().square();
  }
  throw DomainError("unknown activation");
}

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b.data(), b.size());
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b.data(), b.size());
}

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t uint(int width, const char* what) {
    if (pos_ + width > bytes_.size()) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += width;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
    std::string_view s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kSilu:
      return "silu";
    case Activation::kTanh:
      return "tanh";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "tanh") return Activation::kTanh;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

std::size_t CoefficientField::parameter_count(const std::vector<int>& layer_dims) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    n += static_cast<std::size_t>(layer_dims[l + 1]) * (layer_dims[l] + 1);
  }
  return n;
}

std::vector<int> CoefficientField::default_dims(int d, const std::vector<int>& hidden) {
  std::vector<int> dims{d + 3};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(d);
  return dims;
}

CoefficientField::CoefficientField(std::vector<int> layer_dims, Vector params,
                                   Activation activation)
    : layer_dims_(std::move(layer_dims)), params_(std::move(params)), activation_(activation) {
  if (layer_dims_.size() < 2) throw ShapeError("a field needs at least input and output layers");
  for (int w : layer_dims_) {
    if (w < 1) throw ShapeError("layer widths must be positive");
  }
  if (layer_dims_.front() != layer_dims_.back() + 3) {
    throw ShapeError("input width must equal d + 3 with d = output width; got " +
                     std::to_string(layer_dims_.front()) + " and " +
                     std::to_string(layer_dims_.back()));
  }
  const std::size_t expected = parameter_count(layer_dims_);
  if (static_cast<std::size_t>(params_.size()) != expected) {
    throw ShapeError("parameter vector has " + std::to_string(params_.size()) +
                     " entries, layout implies " + std::to_string(expected));
  }
  if (!params_.allFinite()) throw NumericError("parameters must be finite");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(layer_dims_[l + 1]) * (layer_dims_[l] + 1);
  }
}

CoefficientField CoefficientField::init(std::vector<int> layer_dims, std::uint64_t seed,
                                        Activation activation) {
  if (layer_dims.size() < 2) throw ShapeError("a field needs at least input and output layers");
  for (int w : layer_dims) {
    if (w < 1) throw ShapeError("layer widths must be positive");
  }
  Vector params = Vector::Zero(static_cast<Eigen::Index>(parameter_count(layer_dims)));
  std::mt19937_64 rng(seed);
  std::size_t off = 0;
  // Output layer (the last block) stays zero.
  for (std::size_t l = 0; l + 2 < layer_dims.size(); ++l) {
    const auto fan_in = static_cast<double>(layer_dims[l]);
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    const std::size_t count = static_cast<std::size_t>(layer_dims[l + 1]) * (layer_dims[l] + 1);
    for (std::size_t i = 0; i < count; ++i) params[static_cast<Eigen::Index>(off + i)] = dist(rng);
    off += count;
  }
  return {std::move(layer_dims), std::move(params), activation};
}

CoefficientField::RowMajorMap CoefficientField::weight(std::size_t layer) const {
  return {params_.data() + offsets_[layer], layer_dims_[layer + 1], layer_dims_[layer]};
}

Eigen::Map<const Vector> CoefficientField::bias(std::size_t layer) const {
  const std::size_t off =
      offsets_[layer] + static_cast<std::size_t>(layer_dims_[layer + 1]) * layer_dims_[layer];
  return {params_.data() + off, layer_dims_[layer + 1]};
}

void CoefficientField::require_features(const Matrix& features) const {
  if (features.rows() != layer_dims_.front()) {
    throw ShapeError("feature matrix has " + std::to_string(features.rows()) +
                     " rows, field expects " + std::to_string(layer_dims_.front()));
  }
}

Matrix CoefficientField::make_features(const Matrix& z, const Vector& t, const Vector& r) {
  const auto n = z.cols();
  if (t.size() != n || r.size() != n) throw ShapeError("t and r must have one entry per column");
  const auto d = z.rows();
  Matrix x(d + 3, n);
  x.topRows(d) = z;
  x.row(d) = t.transpose();
  x.row(d + 1) = r.transpose();
  x.row(d + 2) = (r - t).transpose();
  return x;
}

Matrix CoefficientField::make_feature_tangents(const Matrix& dz, const Vector& dt,
                                               const Vector& dr) {
  return make_features(dz, dt, dr);
}

Matrix CoefficientField::forward_batch(const Matrix& features, ForwardCache* cache) const {
  require_features(features);
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  Matrix h = features;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (cache != nullptr) cache->inputs.push_back(h);
    Matrix pre = weight(l) * h;
    pre.colwise() += bias(l);
    if (l + 1 == num_layers()) return pre;
    h = activate(activation_, pre.array()).matrix();
    if (cache != nullptr) cache->preactivations.push_back(std::move(pre));
  }
  return h;
}

BatchJvp CoefficientField::jvp_batch(const Matrix& features, const Matrix& feature_tangents,
                                     ForwardCache* cache) const {
  require_features(features);
  if (feature_tangents.rows() != features.rows() || feature_tangents.cols() != features.cols()) {
    throw ShapeError("feature tangents must match features in shape");
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  Matrix h = features;
  Matrix dh = feature_tangents;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (cache != nullptr) cache->inputs.push_back(h);
    Matrix pre = weight(l) * h;
    pre.colwise() += bias(l);
    Matrix dpre = weight(l) * dh;
    if (l + 1 == num_layers()) return {std::move(pre), std::move(dpre)};
    dh = (activate_grad(activation_, pre.array()) * dpre.array()).matrix();
    h = activate(activation_, pre.array()).matrix();
    if (cache != nullptr) cache->preactivations.push_back(std::move(pre));
  }
  return {h, dh};
}

Vector CoefficientField::backprop_batch(const ForwardCache& cache, const Matrix& cotangents) const {
  if (cache.inputs.size() != num_layers() || cache.preactivations.size() + 1 != num_layers()) {
    throw ShapeError("forward cache does not match the field architecture");
  }
  if (cotangents.rows() != state_dim() || cotangents.cols() != cache.inputs.front().cols()) {
    throw ShapeError("cotangent matrix must be d x N");
  }
  Vector grad = Vector::Zero(params_.size());
  Matrix delta = cotangents;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const Matrix& input = cache.inputs[l];
    const auto rows = layer_dims_[l + 1];
    const auto cols = layer_dims_[l];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        grad.data() + offsets_[l], rows, cols);
    gw.noalias() = delta * input.transpose();
    Eigen::Map<Vector>(grad.data() + offsets_[l] + static_cast<std::size_t>(rows) * cols, rows) =
        delta.rowwise().sum();
    if (l == 0) break;
    const Matrix back = weight(l).transpose() * delta;
    delta = (back.array() * activate_grad(activation_, cache.preactivations[l - 1].array()))
                .matrix();
  }
  return grad;
}

Vector CoefficientField::evaluate(const Vector& z, double t, double r) const {
  if (z.size() != state_dim()) throw ShapeError("state dimension mismatch in forward");
  return forward_batch(make_features(z, Vector::Constant(1, t), Vector::Constant(1, r))).col(0);
}

JvpResult CoefficientField::jvp(const DirectionalDerivativeRequest& req) const {
  if (req.z.size() != state_dim() || req.dz.size() != state_dim()) {
    throw ShapeError("state or tangent dimension mismatch in jvp");
  }
  const Matrix x = make_features(req.z, Vector::Constant(1, req.t), Vector::Constant(1, req.r));
  const Matrix dx =
      make_feature_tangents(req.dz, Vector::Constant(1, req.dt), Vector::Constant(1, req.dr));
  BatchJvp out = jvp_batch(x, dx);
  return {out.value.col(0), out.derivative.col(0)};
}

Vector CoefficientField::backprop(const Vector& z, double t, double r,
                                  const Vector& cotangent) const {
  if (z.size() != state_dim() || cotangent.size() != state_dim()) {
    throw ShapeError("state or cotangent dimension mismatch in backprop");
  }
  ForwardCache cache;
  forward_batch(make_features(z, Vector::Constant(1, t), Vector::Constant(1, r)), &cache);
  return backprop_batch(cache, cotangent);
}

void CoefficientField::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(layer_dims_.size()));
  for (int w : layer_dims_) put_u32(os, static_cast<std::uint32_t>(w));
  put_u32(os, static_cast<std::uint32_t>(activation_));
  put_u64(os, static_cast<std::uint64_t>(params_.size()));
  for (Eigen::Index i = 0; i < params_.size(); ++i) put_u64(os, std::bit_cast<std::uint64_t>(params_[i]));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

CoefficientField CoefficientField::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  ByteReader in(std::vector<char>(std::istreambuf_iterator<char>(is), {}));

  if (in.take(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
    throw FormatError("not a swarmflow checkpoint (bad magic): " + path.string());
  }
  const auto version = in.uint(4, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto ndims = in.uint(4, "layer count");
  if (ndims < 2 || ndims > 64) throw FormatError("implausible layer count in checkpoint");
  std::vector<int> dims;
  for (std::uint64_t i = 0; i < ndims; ++i) dims.push_back(static_cast<int>(in.uint(4, "layer dims")));
  const auto act = in.uint(4, "activation");
  if (act > static_cast<std::uint32_t>(Activation::kTanh)) {
    throw FormatError("unknown activation tag " + std::to_string(act));
  }
  const auto count = in.uint(8, "parameter count");
  if (count != CoefficientField::parameter_count(dims)) {
    throw FormatError("parameter count " + std::to_string(count) + " disagrees with layer dims");
  }
  Vector params(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    params[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(in.uint(8, "parameters"));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after checkpoint payload");
  return {std::move(dims), std::move(params), static_cast<Activation>(act)};
}

}  // namespace swarmflow
