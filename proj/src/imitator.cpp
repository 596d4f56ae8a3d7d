#include "dreampipe/imitator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "dreampipe/image_io.hpp"
#include "dreampipe/rng.hpp"
#include "dreampipe/simd/kernels.hpp"

namespace dreampipe {
namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return simd::active().dot_f32(a, b, n);
  } else {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
  }
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    simd::active().axpy_f32(alpha, x, y, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

template <typename T>
T sigmoid(T z) {
  return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

constexpr std::size_t kChunk = 256;

}  // namespace

std::vector<double> positional_encoding(const Vec3& x, int bands) {
  require(bands >= 1, ErrorKind::InvalidArgument, "positional encoding needs at least one band");
  std::vector<double> out(static_cast<std::size_t>(6) * bands);
  for (int k = 0; k < bands; ++k) {
    const double f = std::ldexp(kPi, k);
    for (int i = 0; i < 3; ++i) {
      out[6 * k + i] = std::sin(f * x[i]);
      out[6 * k + 3 + i] = std::cos(f * x[i]);
    }
  }
  return out;
}

void positional_encoding(const Vec3& x, int bands, float* out) {
  const auto enc = positional_encoding(x, bands);
  for (std::size_t i = 0; i < enc.size(); ++i) out[i] = static_cast<float>(enc[i]);
}

CoordinateNormalization CoordinateNormalization::from_bounds(const Aabb& box) {
  CoordinateNormalization n;
  if (!box.valid()) return n;
  n.center = box.center();
  n.half_extent = box.extent() / 2.0;
  for (int i = 0; i < 3; ++i)
    if (!(n.half_extent[i] > 1e-9)) n.half_extent[i] = 1.0;
  return n;
}

template <typename T>
Mlp<T>::Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
  require(sizes_.size() >= 2, ErrorKind::InvalidArgument, "network needs at least two layers");
  for (int s : sizes_) require(s > 0, ErrorKind::InvalidArgument, "layer sizes must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(total, T(0));
  // He-uniform for ReLU layers, Glorot-uniform for the sigmoid output.
  std::uint64_t counter = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double fan_in = sizes_[l];
    const double fan_out = sizes_[l + 1];
    const bool last = l + 2 == sizes_.size();
    const double limit = last ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
    const std::size_t n = static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l];
    for (std::size_t i = 0; i < n; ++i)
      params_[offsets_[l] + i] = static_cast<T>((2.0 * hash_unit(seed, counter++) - 1.0) * limit);
  }
}

template <typename T>
void Mlp<T>::forward(const T* x, T* y) const {
  std::vector<T> cur(x, x + sizes_[0]);
  std::vector<T> next;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    next.assign(out, T(0));
    const T* w = params_.data() + weight_offset(l);
    const T* b = params_.data() + bias_offset(l);
    for (int j = 0; j < out; ++j) {
      const T z = dot(w + static_cast<std::size_t>(j) * in, cur.data(), in) + b[j];
      next[j] = l + 1 == layers ? sigmoid(z) : std::max(z, T(0));
    }
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), y);
}

template <typename T>
double Mlp<T>::loss_and_gradient(const T* x, const T* target, std::size_t n, T* grad) const {
  const std::size_t layers = sizes_.size() - 1;
  const int n_in = sizes_.front();
  const int n_out = sizes_.back();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const T scale = static_cast<T>(1.0 / (static_cast<double>(n) * n_out));
  std::vector<std::vector<T>> chunk_grad(chunks);
  std::vector<double> chunk_loss(chunks, 0.0);

#pragma omp parallel for schedule(static)
  for (std::size_t ci = 0; ci < chunks; ++ci) {
    std::vector<T>& g = chunk_grad[ci];
    g.assign(params_.size(), T(0));
    std::vector<std::vector<T>> act(layers + 1);
    std::vector<std::vector<T>> delta(layers + 1);
    for (std::size_t l = 0; l <= layers; ++l) {
      act[l].resize(sizes_[l]);
      delta[l].resize(sizes_[l]);
    }
    double loss = 0.0;
    const std::size_t end = std::min(n, (ci + 1) * kChunk);
    for (std::size_t s = ci * kChunk; s < end; ++s) {
      std::copy(x + s * n_in, x + (s + 1) * n_in, act[0].begin());
      for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l];
        const T* w = params_.data() + weight_offset(l);
        const T* b = params_.data() + bias_offset(l);
        for (int j = 0; j < sizes_[l + 1]; ++j) {
          const T z = dot(w + static_cast<std::size_t>(j) * in, act[l].data(), in) + b[j];
          act[l + 1][j] = l + 1 == layers ? sigmoid(z) : std::max(z, T(0));
        }
      }
      for (int j = 0; j < n_out; ++j) {
        const T y = act[layers][j];
        const T e = y - target[s * n_out + j];
        loss += static_cast<double>(e) * e;
        delta[layers][j] = T(2) * e * scale * y * (T(1) - y);
      }
      for (std::size_t l = layers; l-- > 0;) {
        const int in = sizes_[l];
        const T* w = params_.data() + weight_offset(l);
        T* gw = g.data() + weight_offset(l);
        T* gb = g.data() + bias_offset(l);
        std::fill(delta[l].begin(), delta[l].end(), T(0));
        for (int j = 0; j < sizes_[l + 1]; ++j) {
          const T d = delta[l + 1][j];
          if (d == T(0)) continue;
          axpy(d, act[l].data(), gw + static_cast<std::size_t>(j) * in, in);
          gb[j] += d;
          if (l > 0) axpy(d, w + static_cast<std::size_t>(j) * in, delta[l].data(), in);
        }
        if (l > 0)
          for (int i = 0; i < in; ++i)
            if (!(act[l][i] > T(0))) delta[l][i] = T(0);
      }
    }
    chunk_loss[ci] = loss;
  }

  double loss = 0.0;
  for (std::size_t ci = 0; ci < chunks; ++ci) {
    loss += chunk_loss[ci];
    axpy(T(1), chunk_grad[ci].data(), grad, params_.size());
  }
  return loss / (static_cast<double>(n) * n_out);
}

template class Mlp<float>;
template class Mlp<double>;

void ImitatorParams::validate() const {
  require(bands >= 1 && bands <= 16, ErrorKind::Config, "imitator bands must lie in [1, 16]");
  require(hidden_layers >= 1 && width >= 1, ErrorKind::Config,
          "imitator needs at least one hidden layer of positive width");
  require(learning_rate > 0.0 && batch_size >= 1 && iterations >= 1, ErrorKind::Config,
          "imitator learning rate, batch size and iterations must be positive");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorKind::Config,
          "holdout fraction must lie in [0, 1)");
}

Vec3 ImitatorModel::predict(const Vec3& position, const Vec3& real_rgb) const {
  std::vector<float> in(static_cast<std::size_t>(6) * bands + 3);
  positional_encoding(normalization.apply(position), bands, in.data());
  for (int c = 0; c < 3; ++c) in[6 * bands + c] = static_cast<float>(real_rgb[c]);
  float out[3];
  net.forward(in.data(), out);
  return {out[0], out[1], out[2]};
}

TrainResult train_imitator(const UvFieldSet& fields, const Image8& real_atlas,
                           const Image8& stylized_atlas, const MaskImage& accu_mask,
                           const ImitatorParams& params) {
  params.validate();
  require_space(accu_mask, MaskSpace::Uv, "train_imitator");
  require(real_atlas.width() == fields.width && real_atlas.height() == fields.height &&
              stylized_atlas.same_shape(real_atlas) && accu_mask.width() == fields.width &&
              accu_mask.height() == fields.height,
          ErrorKind::InvalidArgument, "imitator inputs must share the atlas size");
  require(real_atlas.channels() >= 3, ErrorKind::InvalidArgument, "atlases must be RGB");

  std::vector<std::size_t> texels;
  for (int y = 0; y < fields.height; ++y)
    for (int x = 0; x < fields.width; ++x)
      if (fields.is_valid(x, y) && accu_mask.on(x, y)) texels.push_back(fields.index(x, y));
  require(texels.size() >= params.min_supervised, ErrorKind::Numerical,
          "insufficient supervision: " + std::to_string(texels.size()) +
              " painted texels, need at least " + std::to_string(params.min_supervised));

  TrainResult result;
  ImitatorModel& model = result.model;
  model.bands = params.bands;
  model.normalization = CoordinateNormalization::from_bounds(fields.bounds());
  std::vector<int> sizes{6 * params.bands + 3};
  for (int i = 0; i < params.hidden_layers; ++i) sizes.push_back(params.width);
  sizes.push_back(3);
  model.net = Mlp<float>(sizes, derive_seed(params.seed, "imitator/init"));

  const std::size_t n_in = sizes.front();
  const std::size_t total = texels.size();
  std::vector<float> inputs(total * n_in);
  std::vector<float> targets(total * 3);
  const int ch = real_atlas.channels();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t t = texels[i];
    float* in = inputs.data() + i * n_in;
    positional_encoding(model.normalization.apply(fields.position[t]), params.bands, in);
    for (int c = 0; c < 3; ++c) {
      in[6 * params.bands + c] = real_atlas.data()[t * ch + c] / 255.0f;
      targets[i * 3 + c] = stylized_atlas.data()[t * ch + c] / 255.0f;
    }
  }

  // Shuffle once; the tail is held out.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(params.seed, "imitator/split"));
  for (std::size_t i = total; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * i) >> 64);
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t held = static_cast<std::size_t>(std::floor(params.holdout_fraction * total));
  const std::size_t train_n = total - held;
  result.supervised = total;
  result.held_out = held;

  auto& w = model.net.params();
  std::vector<float> grad(w.size()), m(w.size(), 0.0f), v(w.size(), 0.0f);
  const std::size_t batch = static_cast<std::size_t>(params.batch_size);
  std::vector<float> bx(batch * n_in), by(batch * 3);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;
  rng.seed(derive_seed(params.seed, "imitator/batches"));
  result.loss_history.reserve(params.iterations);

  for (int it = 0; it < params.iterations; ++it) {
    for (std::size_t s = 0; s < batch; ++s) {
      const std::size_t k = order[static_cast<std::size_t>(
          (static_cast<unsigned __int128>(rng()) * train_n) >> 64)];
      std::copy_n(inputs.data() + k * n_in, n_in, bx.data() + s * n_in);
      std::copy_n(targets.data() + k * 3, 3, by.data() + s * 3);
    }
    std::fill(grad.begin(), grad.end(), 0.0f);
    const double loss = model.net.loss_and_gradient(bx.data(), by.data(), batch, grad.data());
    if (!std::isfinite(loss))
      fail(ErrorKind::Numerical, "imitator training diverged at iteration " + std::to_string(it) +
                                     " (loss " + std::to_string(loss) + ")");
    result.loss_history.push_back(static_cast<float>(loss));
    b1t *= beta1;
    b2t *= beta2;
    const double lr_t = params.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = static_cast<float>(beta1 * m[i] + (1.0 - beta1) * grad[i]);
      v[i] = static_cast<float>(beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]);
      w[i] -= static_cast<float>(lr_t * m[i] / (std::sqrt(static_cast<double>(v[i])) + eps));
    }
    if ((it + 1) % 1000 == 0) spdlog::debug("imitator iteration {} loss {:.6f}", it + 1, loss);
  }

  const std::size_t tail = std::min<std::size_t>(100, result.loss_history.size());
  result.final_loss =
      std::accumulate(result.loss_history.end() - static_cast<std::ptrdiff_t>(tail),
                      result.loss_history.end(), 0.0) / static_cast<double>(tail);

  if (held > 0) {
    std::vector<double> err(held);
#pragma omp parallel for schedule(static)
    for (std::size_t h = 0; h < held; ++h) {
      const std::size_t k = order[train_n + h];
      float out[3];
      model.net.forward(inputs.data() + k * n_in, out);
      double e = 0.0;
      for (int c = 0; c < 3; ++c) e += std::abs(out[c] - targets[k * 3 + c]);
      err[h] = e / 3.0;
    }
    result.holdout_error = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(held);
  }
  return result;
}

Image8 imitate_all(const ImitatorModel& model, const UvFieldSet& fields, const Image8& real_atlas) {
  require(real_atlas.width() == fields.width && real_atlas.height() == fields.height,
          ErrorKind::InvalidArgument, "imitate_all: atlas size differs from the UV fields");
  Image8 out(fields.width, fields.height, 3, 0);
  const int ch = real_atlas.channels();
  const std::size_t n_in = static_cast<std::size_t>(6) * model.bands + 3;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fields.height; ++y) {
    std::vector<float> in(n_in);
    for (int x = 0; x < fields.width; ++x) {
      if (!fields.is_valid(x, y)) continue;
      const std::size_t t = fields.index(x, y);
      positional_encoding(model.normalization.apply(fields.position[t]), model.bands, in.data());
      for (int c = 0; c < 3; ++c) in[6 * model.bands + c] = real_atlas.data()[t * ch + c] / 255.0f;
      float pred[3];
      model.net.forward(in.data(), pred);
      for (int c = 0; c < 3; ++c)
        out(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(pred[c], 0.0f, 1.0f) * 255.0f));
    }
  }
  return out;
}

void fuse_imitated(Image8& stylized_atlas, const Image8& imitated, const MaskImage& accu_mask,
                   const UvFieldSet& fields) {
  require_space(accu_mask, MaskSpace::Uv, "fuse_imitated");
  require(stylized_atlas.width() == imitated.width() && stylized_atlas.height() == imitated.height() &&
              accu_mask.width() == imitated.width() && accu_mask.height() == imitated.height() &&
              fields.width == imitated.width() && fields.height == imitated.height(),
          ErrorKind::InvalidArgument, "fuse_imitated: dimension mismatch");
  const int ch = std::min(stylized_atlas.channels(), imitated.channels());
  for (int y = 0; y < imitated.height(); ++y)
    for (int x = 0; x < imitated.width(); ++x)
      if (fields.is_valid(x, y) && !accu_mask.on(x, y))
        for (int c = 0; c < ch; ++c) stylized_atlas(x, y, c) = imitated(x, y, c);
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof bits);
  for (std::size_t i = 0; i < sizeof bits; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  require(pos + sizeof(U) <= in.size(), ErrorKind::Format, "truncated imitator checkpoint");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof bits; ++i) bits |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof bits;
  T value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_imitator(const std::filesystem::path& path, const ImitatorModel& model) {
  std::vector<std::uint8_t> out{'D', 'P', 'I', 'M'};
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.bands));
  const auto& sizes = model.net.sizes();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size() - 1));
  for (int s : sizes) put<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (int i = 0; i < 3; ++i) put<double>(out, model.normalization.center[i]);
  for (int i = 0; i < 3; ++i) put<double>(out, model.normalization.half_extent[i]);
  for (float p : model.net.params()) put<float>(out, p);
  write_file(path, out);
}

ImitatorModel load_imitator(const std::filesystem::path& path) {
  const auto in = read_file(path);
  require(in.size() >= 4 && std::memcmp(in.data(), "DPIM", 4) == 0, ErrorKind::Format,
          "not an imitator checkpoint: " + path.string());
  std::size_t pos = 4;
  require(get<std::uint32_t>(in, pos) == kCheckpointVersion, ErrorKind::Format,
          "unsupported imitator checkpoint version");
  ImitatorModel model;
  model.bands = static_cast<int>(get<std::uint32_t>(in, pos));
  const std::uint32_t layers = get<std::uint32_t>(in, pos);
  require(layers >= 1 && layers < 64, ErrorKind::Format, "corrupt imitator layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i <= layers; ++i) sizes.push_back(static_cast<int>(get<std::uint32_t>(in, pos)));
  require(sizes.front() == 6 * model.bands + 3 && sizes.back() == 3, ErrorKind::Format,
          "imitator checkpoint has inconsistent layer sizes");
  for (int i = 0; i < 3; ++i) model.normalization.center[i] = get<double>(in, pos);
  for (int i = 0; i < 3; ++i) model.normalization.half_extent[i] = get<double>(in, pos);
  model.net = Mlp<float>(sizes, 0);
  for (float& p : model.net.params()) p = get<float>(in, pos);
  require(pos == in.size(), ErrorKind::Format, "trailing bytes in imitator checkpoint");
  for (float p : model.net.params())
    require(std::isfinite(p), ErrorKind::Format, "imitator checkpoint has non-finite weights");
  return model;
}

}  // namespace dreampipe
