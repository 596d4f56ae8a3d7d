#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dreampipe/geometry.hpp"
#include "dreampipe/image.hpp"
#include "dreampipe/uv_fields.hpp"

namespace dreampipe {

// For k = 0..L-1: sin(2^k pi x_i) for i = 0..2, then cos(2^k pi x_i). Length 6L.
std::vector<double> positional_encoding(const Vec3& x, int bands);
void positional_encoding(const Vec3& x, int bands, float* out);

// Maps a box onto [-1, 1]^3. Flat axes get unit half-extent.
struct CoordinateNormalization {
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Ones();

  static CoordinateNormalization from_bounds(const Aabb& box);
  Vec3 apply(const Vec3& x) const { return (x - center).cwiseQuotient(half_extent); }
  Vec3 invert(const Vec3& n) const { return n.cwiseProduct(half_extent) + center; }
};

// Fully connected ReLU network with a sigmoid output layer. Parameters are
// stored flat, layer by layer: weights (out x in, row-major) then biases.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  // sizes = {input, hidden..., output}
  Mlp(std::vector<int> sizes, std::uint64_t seed);

  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int input_size() const noexcept { return sizes_.front(); }
  int output_size() const noexcept { return sizes_.back(); }
  std::vector<T>& params() noexcept { return params_; }
  const std::vector<T>& params() const noexcept { return params_; }

  void forward(const T* x, T* y) const;
  // Mean over samples and outputs of the squared error for n row-major
  // samples. The gradient of that mean is added into `grad`.
  double loss_and_gradient(const T* x, const T* target, std::size_t n, T* grad) const;

 private:
  std::size_t weight_offset(std::size_t layer) const noexcept { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const noexcept {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer];
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<T> params_;
};

extern template class Mlp<float>;
extern template class Mlp<double>;

struct ImitatorParams {
  int bands = 6;
  int hidden_layers = 4;
  int width = 128;
  double learning_rate = 1e-3;
  int batch_size = 8192;
  int iterations = 5000;
  double holdout_fraction = 0.05;
  std::size_t min_supervised = 1000;
  std::uint64_t seed = 0;
  void validate() const;
};

struct ImitatorModel {
  int bands = 6;
  CoordinateNormalization normalization;
  Mlp<float> net;

  // Real colour and stylized prediction are RGB in [0,1].
  Vec3 predict(const Vec3& position, const Vec3& real_rgb) const;
};

struct TrainResult {
  ImitatorModel model;
  double final_loss = 0.0;     // mean of the last 100 batch losses
  double holdout_error = 0.0;  // mean |prediction - target| over held-out texels
  std::vector<float> loss_history;
  std::size_t supervised = 0;
  std::size_t held_out = 0;
};

// Fits stylized = F(encoding(position), real) on valid texels with accu >= 0.5.
TrainResult train_imitator(const UvFieldSet& fields, const Image8& real_atlas,
                           const Image8& stylized_atlas, const MaskImage& accu_mask,
                           const ImitatorParams& params);

// Prediction for every valid texel; invalid texels black.
Image8 imitate_all(const ImitatorModel& model, const UvFieldSet& fields, const Image8& real_atlas);

// Valid texels outside accu take the imitated colour; the rest are untouched.
void fuse_imitated(Image8& stylized_atlas, const Image8& imitated, const MaskImage& accu_mask,
                   const UvFieldSet& fields);

// Little-endian checkpoint: "DPIM", u32 version, u32 bands, u32 layer count,
// u32 sizes[layer count + 1], f64 centre[3], f64 half_extent[3], then f32
// parameters in Mlp order.
void save_imitator(const std::filesystem::path& path, const ImitatorModel& model);
ImitatorModel load_imitator(const std::filesystem::path& path);

}  // namespace dreampipe
