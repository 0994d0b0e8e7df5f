#include "galvae/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "galvae/error.hpp"
#include "galvae/kernels.hpp"

namespace galvae::nn {

Dense dense_init(std::size_t in, std::size_t out, Rng& rng) {
  Dense d{Matrix(out, in), Vector(out, 0.0)};
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (auto& w : d.w.data()) w = sd * rng.gaussian();
  return d;
}

Matrix forward(const Dense& layer, const Matrix& x) {
  if (x.cols() != layer.in()) throw DataError("dense forward: input width mismatch");
  Matrix y = mat_mul_nt(x, layer.w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.b[c];
  }
  return y;
}

DenseGrad zero_grad(const Dense& layer) {
  return {Matrix(layer.out(), layer.in()), Vector(layer.out(), 0.0)};
}

Matrix backward(const Dense& layer, const Matrix& x, const Matrix& dy, DenseGrad& grad) {
  if (dy.cols() != layer.out() || dy.rows() != x.rows())
    throw DataError("dense backward: gradient shape mismatch");
  const Matrix dw = mat_mul_tn(dy, x);
  auto gw = grad.w.data();
  auto dwd = dw.data();
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dwd[i];
  for (std::size_t r = 0; r < dy.rows(); ++r)
    for (std::size_t c = 0; c < dy.cols(); ++c) grad.b[c] += dy(r, c);
  return mat_mul(dy, layer.w);
}

Matrix leaky_relu(const Matrix& pre) {
  Matrix out = pre;
  for (auto& v : out.data())
    if (v < 0.0) v *= kLeakySlope;
  return out;
}

Matrix leaky_relu_backward(const Matrix& pre, const Matrix& dout) {
  Matrix d = dout;
  auto p = pre.data();
  auto dd = d.data();
  for (std::size_t i = 0; i < dd.size(); ++i)
    if (p[i] < 0.0) dd[i] *= kLeakySlope;
  return d;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::size_t parameter_count(std::span<const ConstTensorRef> tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

Vector flatten(std::span<const ConstTensorRef> tensors) {
  Vector flat;
  flat.reserve(parameter_count(tensors));
  for (const auto& t : tensors) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

void assign(std::span<const TensorRef> tensors, const Vector& flat) {
  std::size_t off = 0;
  for (const auto& t : tensors) {
    if (off + t.data.size() > flat.size()) throw DataError("assign: flat vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t.data.size(), t.data.begin());
    off += t.data.size();
  }
  if (off != flat.size()) throw DataError("assign: flat vector too long");
}

void Adam::step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads) {
  if (params.size() != grads.size()) throw DataError("adam: params/grads count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.data.size(), 0.0);
      v_.emplace_back(p.data.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw DataError("adam: tensor layout changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].data;
    auto g = grads[k].data;
    if (p.size() != g.size() || p.size() != m_[k].size())
      throw DataError("adam: tensor size mismatch");
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

namespace {

constexpr char kMagic[5] = {'G', 'A', 'L', 'V', '1'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>(static_cast<unsigned char>(v >> (8 * i))));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(U) > bytes.size()) throw DataError("tensor file: truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

std::string encode_tensors(char tag, std::span<const ConstTensorRef> tensors) {
  std::string out(kMagic, sizeof(kMagic));
  out.push_back(tag);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.rows * t.cols != t.data.size()) throw DataError("tensor file: shape/data mismatch");
    put_le<std::uint64_t>(out, t.rows);
    put_le<std::uint64_t>(out, t.cols);
  }
  for (const auto& t : tensors)
    for (double v : t.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

void save_tensors(const std::filesystem::path& path, char tag,
                  std::span<const ConstTensorRef> tensors) {
  const std::string bytes = encode_tensors(tag, tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("tensor file: cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TensorFile decode_tensors(std::string_view bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("tensor file: bad magic");
  TensorFile f;
  f.tag = bytes[5];
  std::size_t pos = 6;
  const auto count = get_le<std::uint32_t>(bytes, pos);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto r = get_le<std::uint64_t>(bytes, pos);
    const auto c = get_le<std::uint64_t>(bytes, pos);
    if (r > (1u << 24) || c > (1u << 24)) throw DataError("tensor file: implausible shape");
    shapes.emplace_back(r, c);
  }
  for (const auto& [r, c] : shapes) {
    if (r * c > (bytes.size() - pos) / 8) throw DataError("tensor file: truncated");
    std::vector<double> data(r * c);
    for (auto& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
    f.tensors.emplace_back(r, c, std::move(data));
  }
  if (pos != bytes.size()) throw DataError("tensor file: trailing bytes");
  return f;
}

TensorFile load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("tensor file: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_tensors(ss.str());
}

}  // namespace galvae::nn
