#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "swarmflow/field.hpp"

namespace swarmflow {

enum class Activation : std::uint32_t { kSilu = 0, kTanh = 1 };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

// Per-layer activations kept from a forward pass, consumed by backprop_batch.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to layer l (features for l = 0)
  std::vector<Matrix> preactivations;  // W_l h + b_l for each hidden layer
};

struct BatchJvp {
  Matrix value;       // d x N
  Matrix derivative;  // d x N
};

// Feed-forward interval-coefficient field c_theta(z, t, r).
//
// Input features are (z, t, r, r - t), so layer_dims.front() == d + 3 and
// layer_dims.back() == d. Hidden layers use `activation`; the output layer is affine.
//
// Parameter layout: for each layer l in order, the weight matrix
// (layer_dims[l+1] x layer_dims[l]) stored row-major, followed by its bias vector.
class CoefficientField final : public CoefficientModel {
 public:
  CoefficientField(std::vector<int> layer_dims, Vector params,
                   Activation activation = Activation::kSilu);

  // Hidden layers ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases;
  // the output layer starts at zero so the initial policy is free drift.
  static CoefficientField init(std::vector<int> layer_dims, std::uint64_t seed,
                               Activation activation = Activation::kSilu);

  // Default architecture for state dimension d: (d+3, hidden..., d).
  static std::vector<int> default_dims(int d, const std::vector<int>& hidden = {128, 128});

  static std::size_t parameter_count(const std::vector<int>& layer_dims);

  int state_dim() const override { return layer_dims_.back(); }
  Vector evaluate(const Vector& z, double t, double r) const override;
  JvpResult jvp(const DirectionalDerivativeRequest& req) const override;

  Vector forward(const Vector& z, double t, double r) const { return evaluate(z, t, r); }

  // Gradient of cotangent^T c_theta(z, t, r) with respect to the parameters.
  Vector backprop(const Vector& z, double t, double r, const Vector& cotangent) const;

  // Batched variants; columns are samples. `features` come from make_features.
  static Matrix make_features(const Matrix& z, const Vector& t, const Vector& r);
  static Matrix make_feature_tangents(const Matrix& dz, const Vector& dt, const Vector& dr);

  Matrix forward_batch(const Matrix& features, ForwardCache* cache = nullptr) const;
  BatchJvp jvp_batch(const Matrix& features, const Matrix& feature_tangents,
                     ForwardCache* cache = nullptr) const;
  // Sum over columns of the per-sample parameter gradients.
  Vector backprop_batch(const ForwardCache& cache, const Matrix& cotangents) const;

  const std::vector<int>& layer_dims() const noexcept { return layer_dims_; }
  Activation activation() const noexcept { return activation_; }
  const Vector& params() const noexcept { return params_; }
  // Single-writer: no evaluation may run concurrently with a mutation.
  Vector& mutable_params() noexcept { return params_; }

  void save(const std::filesystem::path& path) const;
  static CoefficientField load(const std::filesystem::path& path);

 private:
  using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>;
  RowMajorMap weight(std::size_t layer) const;
  Eigen::Map<const Vector> bias(std::size_t layer) const;
  std::size_t num_layers() const noexcept { return layer_dims_.size() - 1; }
  void require_features(const Matrix& features) const;

  std::vector<int> layer_dims_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  Vector params_;
  Activation activation_;
};

// Checkpoint file header magic; see docs/formats.md.
inline constexpr std::string_view kCheckpointMagic = "SWFLOWCF";
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace swarmflow
