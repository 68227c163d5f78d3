#include "pgdcd/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pgdcd/datasets.hpp"
#include "pgdcd/errors.hpp"
#include "pgdcd/rng.hpp"

namespace pgdcd {

const char* to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::Io: return "io error";
    case FormatErrc::Truncated: return "truncated input";
    case FormatErrc::Malformed: return "malformed input";
    case FormatErrc::VersionMismatch: return "version mismatch";
    case FormatErrc::DimMismatch: return "dimension mismatch";
  }
  return "format error";
}

ImageVec::ImageVec(Vec values, double lo, double hi)
    : data(std::move(values)), domain_lo(lo), domain_hi(hi) {
  if (!(lo < hi)) throw std::invalid_argument("ImageVec: requires domain_lo < domain_hi");
  for (double v : data) {
    if (!std::isfinite(v) || v < lo || v > hi) {
      throw std::invalid_argument("ImageVec: coordinate outside the declared domain");
    }
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec softmax(std::span<const double> logits) {
  Vec p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double cross_entropy(std::span<const double> logits, std::size_t y) {
  if (y >= logits.size()) throw std::out_of_range("cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - mx);
  return (mx + std::log(total)) - logits[y];
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Vec ClassifierModel::forward(std::span<const double> x) const {
  require_same_dim(x.size(), dim_in(), "forward");
  return forward_impl(x);
}

LossGrad ClassifierModel::loss_and_input_grad(std::span<const double> x, std::size_t y) const {
  require_same_dim(x.size(), dim_in(), "loss_and_input_grad");
  if (y >= num_classes()) throw std::out_of_range("loss_and_input_grad: label out of range");
  return loss_grad_impl(x, y);
}

namespace {

// y = M x + b
Vec affine(const Matrix& m, std::span<const double> b, std::span<const double> x) {
  Vec out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = b[r];
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

// M^T v
Vec transpose_times(const Matrix& m, std::span<const double> v) {
  Vec out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c] * v[r];
  }
  return out;
}

// p - e_y
Vec softmax_residual(std::span<const double> logits, std::size_t y) {
  Vec p = softmax(logits);
  p[y] -= 1.0;
  return p;
}

void check_finite_params(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw std::invalid_argument(std::string(what) + ": non-finite parameter");
}

}  // namespace

// ---------------------------------------------------------------------------

LinearSoftmaxModel::LinearSoftmaxModel(Matrix weights, Vec biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  require_same_dim(weights_.rows, biases_.size(), "LinearSoftmaxModel");
  if (weights_.rows < 2) throw std::invalid_argument("LinearSoftmaxModel: need at least 2 classes");
  if (weights_.cols == 0) throw std::invalid_argument("LinearSoftmaxModel: empty input dimension");
  check_finite_params(weights_.data, "LinearSoftmaxModel");
  check_finite_params(biases_, "LinearSoftmaxModel");
}

LinearSoftmaxModel LinearSoftmaxModel::zeros(std::size_t dim_in, std::size_t num_classes) {
  return LinearSoftmaxModel(Matrix(num_classes, dim_in), Vec(num_classes, 0.0));
}

Vec LinearSoftmaxModel::forward_impl(std::span<const double> x) const {
  return affine(weights_, biases_, x);
}

LossGrad LinearSoftmaxModel::loss_grad_impl(std::span<const double> x, std::size_t y) const {
  const Vec logits = forward_impl(x);
  LossGrad out;
  out.loss = cross_entropy(logits, y);
  out.grad = transpose_times(weights_, softmax_residual(logits, y));
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

MlpModel::MlpModel(Matrix hidden_weights, Vec hidden_biases, Matrix out_weights, Vec out_biases,
                   Activation activation)
    : w1_(std::move(hidden_weights)),
      b1_(std::move(hidden_biases)),
      w2_(std::move(out_weights)),
      b2_(std::move(out_biases)),
      act_(activation) {
  require_same_dim(w1_.rows, b1_.size(), "MlpModel hidden layer");
  require_same_dim(w2_.cols, w1_.rows, "MlpModel output layer");
  require_same_dim(w2_.rows, b2_.size(), "MlpModel output layer");
  if (w2_.rows < 2) throw std::invalid_argument("MlpModel: need at least 2 classes");
  if (w1_.cols == 0 || w1_.rows == 0) throw std::invalid_argument("MlpModel: empty layer");
  check_finite_params(w1_.data, "MlpModel");
  check_finite_params(b1_, "MlpModel");
  check_finite_params(w2_.data, "MlpModel");
  check_finite_params(b2_, "MlpModel");
}

MlpModel MlpModel::random_init(std::size_t dim_in, std::size_t hidden, std::size_t num_classes,
                               Activation activation, std::uint64_t seed) {
  Rng rng(seed);
  Matrix w1(hidden, dim_in);
  Matrix w2(num_classes, hidden);
  const double s1 = activation == Activation::Relu ? std::sqrt(2.0 / dim_in)
                                                   : std::sqrt(2.0 / (dim_in + hidden));
  const double s2 = std::sqrt(2.0 / (hidden + num_classes));
  for (double& w : w1.data) w = rng.normal(0.0, s1);
  for (double& w : w2.data) w = rng.normal(0.0, s2);
  return MlpModel(std::move(w1), Vec(hidden, 0.0), std::move(w2), Vec(num_classes, 0.0),
                  activation);
}

namespace {

double activate(Activation a, double z) {
  return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the pre-activation z and activation value h.
double activate_deriv(Activation a, double z, double h) {
  return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

struct MlpPass {
  Vec pre;
  Vec hidden;
  Vec logits;
};

MlpPass mlp_forward(const Matrix& w1, const Vec& b1, const Matrix& w2, const Vec& b2,
                    Activation act, std::span<const double> x) {
  MlpPass pass;
  pass.pre = affine(w1, b1, x);
  pass.hidden.resize(pass.pre.size());
  for (std::size_t i = 0; i < pass.pre.size(); ++i) pass.hidden[i] = activate(act, pass.pre[i]);
  pass.logits = affine(w2, b2, pass.hidden);
  return pass;
}

}  // namespace

Vec MlpModel::forward_impl(std::span<const double> x) const {
  return mlp_forward(w1_, b1_, w2_, b2_, act_, x).logits;
}

LossGrad MlpModel::loss_grad_impl(std::span<const double> x, std::size_t y) const {
  const MlpPass pass = mlp_forward(w1_, b1_, w2_, b2_, act_, x);
  LossGrad out;
  out.loss = cross_entropy(pass.logits, y);
  Vec g_hidden = transpose_times(w2_, softmax_residual(pass.logits, y));
  for (std::size_t i = 0; i < g_hidden.size(); ++i) {
    g_hidden[i] *= activate_deriv(act_, pass.pre[i], pass.hidden[i]);
  }
  out.grad = transpose_times(w1_, g_hidden);
  return out;
}

// ---------------------------------------------------------------------------

ConstantModel::ConstantModel(std::size_t dim_in, Vec logits) : dim_(dim_in), logits_(std::move(logits)) {
  if (dim_ == 0) throw std::invalid_argument("ConstantModel: empty input dimension");
  if (logits_.size() < 2) throw std::invalid_argument("ConstantModel: need at least 2 classes");
  check_finite_params(logits_, "ConstantModel");
}

LossGrad ConstantModel::loss_grad_impl(std::span<const double>, std::size_t y) const {
  return {cross_entropy(logits_, y), Vec(dim_, 0.0)};
}

// ---------------------------------------------------------------------------

Vec finite_diff_grad(const ClassifierModel& model, std::span<const double> x, std::size_t y,
                     double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be positive");
  Vec probe(x.begin(), x.end());
  Vec grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = cross_entropy(model.forward(probe), y);
    probe[i] = x[i] - h;
    const double down = cross_entropy(model.forward(probe), y);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> draw_batch(Rng& rng, std::size_t n, std::size_t batch) {
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.below(n);
  return idx;
}

void check_training_inputs(const ClassifierModel& model, const LabeledDataset& data,
                           std::size_t batch_size) {
  if (data.size() == 0) throw std::invalid_argument("train_toy: empty dataset");
  data.validate();
  require_same_dim(data.dim(), model.dim_in(), "train_toy");
  if (data.num_classes > model.num_classes()) {
    throw std::invalid_argument("train_toy: dataset has more classes than the model");
  }
  if (batch_size == 0) throw std::invalid_argument("train_toy: batch size must be positive");
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace

LinearSoftmaxModel train_toy(const LinearSoftmaxModel& model, const LabeledDataset& data,
                             std::size_t steps, double lr, std::uint64_t seed,
                             std::size_t batch_size) {
  check_training_inputs(model, data, batch_size);
  LinearSoftmaxModel out = model;
  Rng rng(seed);
  const std::size_t batch = std::min(batch_size, data.size());
  const std::size_t m = out.num_classes();
  const std::size_t d = out.dim_in();
  for (std::size_t step = 0; step < steps; ++step) {
    Matrix gw(m, d);
    Vec gb(m, 0.0);
    for (std::size_t i : draw_batch(rng, data.size(), batch)) {
      const auto& x = data.images[i].data;
      const Vec r = softmax_residual(affine(out.weights(), out.biases(), x), data.labels[i]);
      for (std::size_t k = 0; k < m; ++k) {
        axpy(r[k], x, {gw.data.data() + k * d, d});
        gb[k] += r[k];
      }
    }
    const double scale = -lr / static_cast<double>(batch);
    axpy(scale, gw.data, out.weights().data);
    axpy(scale, gb, out.biases());
  }
  return out;
}

MlpModel train_toy(const MlpModel& model, const LabeledDataset& data, std::size_t steps, double lr,
                   std::uint64_t seed, std::size_t batch_size) {
  check_training_inputs(model, data, batch_size);
  MlpModel out = model;
  Rng rng(seed);
  const std::size_t batch = std::min(batch_size, data.size());
  const std::size_t d = out.dim_in();
  const std::size_t h = out.hidden();
  const std::size_t m = out.num_classes();
  for (std::size_t step = 0; step < steps; ++step) {
    Matrix gw1(h, d);
    Vec gb1(h, 0.0);
    Matrix gw2(m, h);
    Vec gb2(m, 0.0);
    for (std::size_t i : draw_batch(rng, data.size(), batch)) {
      const auto& x = data.images[i].data;
      const MlpPass pass = mlp_forward(out.hidden_weights(), out.hidden_biases(),
                                       out.out_weights(), out.out_biases(), out.activation(), x);
      const Vec r = softmax_residual(pass.logits, data.labels[i]);
      for (std::size_t k = 0; k < m; ++k) {
        axpy(r[k], pass.hidden, {gw2.data.data() + k * h, h});
        gb2[k] += r[k];
      }
      Vec g_hidden = transpose_times(out.out_weights(), r);
      for (std::size_t j = 0; j < h; ++j) {
        g_hidden[j] *= activate_deriv(out.activation(), pass.pre[j], pass.hidden[j]);
        axpy(g_hidden[j], x, {gw1.data.data() + j * d, d});
        gb1[j] += g_hidden[j];
      }
    }
    const double scale = -lr / static_cast<double>(batch);
    axpy(scale, gw1.data, out.hidden_weights().data);
    axpy(scale, gb1, out.hidden_biases());
    axpy(scale, gw2.data, out.out_weights().data);
    axpy(scale, gb2, out.out_biases());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weights file.
//
//   pgdcd-model 1
//   arch <linear|mlp|constant>
//   activation <relu|tanh>              (mlp only)
//   dims <in> [<hidden>] <classes>      (constant: <in> <classes>)
//   tensor <name> <extent...>
//   <hex floats>
//   ...
//   end

namespace {

constexpr int kModelVersion = 1;

void put_hex(std::ostream& os, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  os.write(buf, res.ptr - buf);
}

void put_tensor(std::ostream& os, const char* name, std::span<const double> values,
                std::size_t rows, std::size_t cols) {
  os << "tensor " << name << ' ' << rows;
  if (cols != 0) os << ' ' << cols;
  os << '\n';
  const std::size_t per_line = cols == 0 ? values.size() : cols;
  for (std::size_t i = 0; i < values.size(); ++i) {
    put_hex(os, values[i]);
    os << ((i + 1) % per_line == 0 ? '\n' : ' ');
  }
}

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : text_(text) {}

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  std::string_view next(const char* what) {
    skip_space();
    if (pos_ >= text_.size()) {
      throw FormatError(FormatErrc::Truncated, std::string("expected ") + what);
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view keyword) {
    const auto tok = next(std::string(keyword).c_str());
    if (tok != keyword) {
      throw FormatError(FormatErrc::Malformed,
                        "expected '" + std::string(keyword) + "', got '" + std::string(tok) + "'");
    }
  }

  std::size_t next_size(const char* what) {
    const auto tok = next(what);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) {
      throw FormatError(FormatErrc::Malformed, std::string("bad integer for ") + what);
    }
    return v;
  }

  double next_hex(const char* what) {
    const auto tok = next(what);
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, std::chars_format::hex);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) {
      throw FormatError(FormatErrc::Malformed, std::string("bad float in ") + what);
    }
    return v;
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

Vec read_tensor(TokenReader& in, const char* name, std::size_t rows, std::size_t cols) {
  in.expect("tensor");
  in.expect(name);
  const std::size_t r = in.next_size(name);
  const std::size_t c = cols == 0 ? 0 : in.next_size(name);
  if (r != rows || c != cols) {
    throw FormatError(FormatErrc::DimMismatch,
                      std::string("tensor ") + name + " disagrees with declared dims");
  }
  Vec v((cols == 0 ? 1 : cols) * rows);
  for (double& x : v) x = in.next_hex(name);
  return v;
}

Matrix to_matrix(Vec v, std::size_t rows, std::size_t cols) {
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.data = std::move(v);
  return m;
}

}  // namespace

std::string serialize_model(const ClassifierModel& model) {
  std::ostringstream os;
  os << "pgdcd-model " << kModelVersion << '\n' << "arch " << model.arch() << '\n';
  if (const auto* lin = dynamic_cast<const LinearSoftmaxModel*>(&model)) {
    os << "dims " << lin->dim_in() << ' ' << lin->num_classes() << '\n';
    put_tensor(os, "weights", lin->weights().data, lin->num_classes(), lin->dim_in());
    put_tensor(os, "biases", lin->biases(), lin->num_classes(), 0);
  } else if (const auto* mlp = dynamic_cast<const MlpModel*>(&model)) {
    os << "activation " << to_string(mlp->activation()) << '\n';
    os << "dims " << mlp->dim_in() << ' ' << mlp->hidden() << ' ' << mlp->num_classes() << '\n';
    put_tensor(os, "hidden_weights", mlp->hidden_weights().data, mlp->hidden(), mlp->dim_in());
    put_tensor(os, "hidden_biases", mlp->hidden_biases(), mlp->hidden(), 0);
    put_tensor(os, "out_weights", mlp->out_weights().data, mlp->num_classes(), mlp->hidden());
    put_tensor(os, "out_biases", mlp->out_biases(), mlp->num_classes(), 0);
  } else if (const auto* cst = dynamic_cast<const ConstantModel*>(&model)) {
    os << "dims " << cst->dim_in() << ' ' << cst->num_classes() << '\n';
    put_tensor(os, "logits", cst->logits(), cst->num_classes(), 0);
  } else {
    throw std::invalid_argument("serialize_model: unsupported architecture");
  }
  os << "end\n";
  return os.str();
}

std::unique_ptr<ClassifierModel> parse_model(std::string_view text) {
  TokenReader in(text);
  in.expect("pgdcd-model");
  if (in.next_size("version") != kModelVersion) {
    throw FormatError(FormatErrc::VersionMismatch, "unsupported model file version");
  }
  in.expect("arch");
  const std::string arch(in.next("architecture"));
  std::unique_ptr<ClassifierModel> model;
  try {
    if (arch == "linear") {
      in.expect("dims");
      const std::size_t d = in.next_size("dims");
      const std::size_t m = in.next_size("dims");
      Vec w = read_tensor(in, "weights", m, d);
      Vec b = read_tensor(in, "biases", m, 0);
      model = std::make_unique<LinearSoftmaxModel>(to_matrix(std::move(w), m, d), std::move(b));
    } else if (arch == "mlp") {
      in.expect("activation");
      const Activation act = parse_activation(in.next("activation"));
      in.expect("dims");
      const std::size_t d = in.next_size("dims");
      const std::size_t h = in.next_size("dims");
      const std::size_t m = in.next_size("dims");
      Vec w1 = read_tensor(in, "hidden_weights", h, d);
      Vec b1 = read_tensor(in, "hidden_biases", h, 0);
      Vec w2 = read_tensor(in, "out_weights", m, h);
      Vec b2 = read_tensor(in, "out_biases", m, 0);
      model = std::make_unique<MlpModel>(to_matrix(std::move(w1), h, d), std::move(b1),
                                         to_matrix(std::move(w2), m, h), std::move(b2), act);
    } else if (arch == "constant") {
      in.expect("dims");
      const std::size_t d = in.next_size("dims");
      const std::size_t m = in.next_size("dims");
      model = std::make_unique<ConstantModel>(d, read_tensor(in, "logits", m, 0));
    } else {
      throw FormatError(FormatErrc::Malformed, "unknown architecture '" + arch + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrc::Malformed, e.what());
  }
  in.expect("end");
  if (!in.at_end()) throw FormatError(FormatErrc::Malformed, "trailing data after 'end'");
  return model;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrc::Io, "cannot open " + path.string() + " for writing");
  os << serialize_model(model);
  if (!os) throw FormatError(FormatErrc::Io, "write failed for " + path.string());
}

std::unique_ptr<ClassifierModel> load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_model(buf.str());
}

}  // namespace pgdcd
