#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace megsim {

/** Base class for all library errors. */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Tensor shape is malformed or two shapes do not match. */
class ShapeError : public Error {
 public:
  using Error::Error;
};

/** A numeric argument is outside its documented domain. */
class ValueError : public Error {
 public:
  using Error::Error;
};

/** A bit payload's length disagrees with the expected element count. */
class PayloadSizeError : public Error {
 public:
  using Error::Error;
};

/** Configuration rejected; carries the offending field path. */
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class TensorRole { seed, sketch, prompt, image };

inline std::string_view to_string(TensorRole role) {
  switch (role) {
    case TensorRole::seed: return "seed";
    case TensorRole::sketch: return "sketch";
    case TensorRole::prompt: return "prompt";
    case TensorRole::image: return "image";
  }
  return "seed";
}

/**
 * Dense row-major tensor of finite doubles.
 *
 * Zero-size shapes (any dimension 0) are legal values so that degenerate
 * payloads can flow through channels and codecs; samplers that cannot
 * produce them reject such shapes instead.
 */
struct FeatureTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  TensorRole role = TensorRole::seed;

  std::size_t size() const noexcept { return values.size(); }
};

inline std::size_t shape_elements(std::span<const std::size_t> shape) {
  std::size_t n = shape.empty() ? 0 : 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

/** Validated constructor; throws ShapeError/ValueError on bad input. */
inline FeatureTensor make_tensor(std::vector<std::size_t> shape,
                                 std::vector<double> values,
                                 TensorRole role = TensorRole::seed) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  if (shape_elements(shape) != values.size())
    throw ShapeError("tensor value count does not match shape product");
  for (double v : values)
    if (!std::isfinite(v)) throw ValueError("tensor values must be finite");
  FeatureTensor t;
  t.shape = std::move(shape);
  t.values = std::move(values);
  t.role = role;
  return t;
}

inline FeatureTensor zeros_tensor(std::vector<std::size_t> shape,
                                  TensorRole role = TensorRole::seed) {
  std::vector<double> v(shape_elements(shape), 0.0);
  return make_tensor(std::move(shape), std::move(v), role);
}

inline FeatureTensor reshape(FeatureTensor t, std::vector<std::size_t> shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  if (shape_elements(shape) != t.values.size())
    throw ShapeError("reshape target does not match element count");
  t.shape = std::move(shape);
  return t;
}

/**
 * Named random stream: (seed, stream id). Equal pairs always produce equal
 * sequences; substreams derived under distinct labels are independent.
 */
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

inline RngStream root_stream(std::uint64_t seed) { return RngStream{seed, 0}; }

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/** splitmix64 output function; also used as a general 64-bit mixer. */
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/** FNV-1a over the label bytes; stable across platforms. */
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

/** Derive a child stream; deterministic in (parent, label) only. */
inline RngStream substream(RngStream parent, std::string_view label) {
  const std::uint64_t tag = detail::fnv1a64(label);
  return RngStream{parent.seed,
                   detail::mix64(detail::mix64(parent.stream + detail::kGolden) ^ tag)};
}

/**
 * Deterministic generator over a stream: splitmix64 counter core with an
 * explicit polar-method normal sampler. std distributions are deliberately
 * avoided; their sequences are implementation-defined.
 */
class Rng {
 public:
  explicit Rng(RngStream s)
      : state_(detail::mix64(s.seed + detail::kGolden) ^
               detail::mix64(s.stream + 0xD1B54A32D192ED03ull)) {}

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /** Uniform in [0, 1) with 53 random bits. */
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /** Standard normal via Marsaglia's polar method; pairs are cached. */
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/** I.i.d. standard-normal tensor; every dimension must be >= 1. */
inline FeatureTensor gaussian_tensor(std::span<const std::size_t> shape,
                                     RngStream stream,
                                     TensorRole role = TensorRole::seed) {
  if (shape.empty()) throw ShapeError("gaussian_tensor: shape must be non-empty");
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("gaussian_tensor: zero dimension");
  FeatureTensor t;
  t.shape.assign(shape.begin(), shape.end());
  t.values.resize(shape_elements(shape));
  t.role = role;
  Rng rng(stream);
  for (double& v : t.values) v = rng.next_normal();
  return t;
}

inline FeatureTensor gaussian_tensor(std::initializer_list<std::size_t> shape,
                                     RngStream stream,
                                     TensorRole role = TensorRole::seed) {
  return gaussian_tensor(std::span<const std::size_t>(shape.begin(), shape.size()),
                         stream, role);
}

/** Mean squared error over all elements; empty tensors compare as 0. */
inline double mse(const FeatureTensor& a, const FeatureTensor& b) {
  if (a.shape != b.shape) throw ShapeError("mse: shape mismatch");
  if (a.values.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.values.size());
}

inline constexpr double kPsnrCapDb = 200.0;

/** Peak signal-to-noise ratio in dB; zero error reports the cap. */
inline double psnr(const FeatureTensor& a, const FeatureTensor& b,
                   double peak = 1.0, double cap_db = kPsnrCapDb) {
  if (!(peak > 0.0)) throw ValueError("psnr: peak must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return cap_db;
  return 10.0 * std::log10(peak * peak / m);
}

struct DistortionReport {
  double mse = 0.0;
  double psnr_db = kPsnrCapDb;
  double per_dim_max_err = 0.0;
};

inline DistortionReport distortion_report(const FeatureTensor& reference,
                                          const FeatureTensor& received,
                                          double peak = 1.0) {
  DistortionReport r;
  r.mse = mse(reference, received);
  r.psnr_db = r.mse == 0.0 ? kPsnrCapDb : 10.0 * std::log10(peak * peak / r.mse);
  for (std::size_t i = 0; i < reference.values.size(); ++i)
    r.per_dim_max_err =
        std::max(r.per_dim_max_err, std::abs(reference.values[i] - received.values[i]));
  return r;
}

}  // namespace megsim
