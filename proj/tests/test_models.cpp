#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pgdcd/datasets.hpp"
#include "pgdcd/errors.hpp"
#include "pgdcd/fingerprint.hpp"
#include "pgdcd/models.hpp"
#include "pgdcd/rng.hpp"

using namespace pgdcd;

namespace {

double rel_err(const Vec& a, const Vec& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

Vec random_point(Rng& rng, std::size_t d) {
  Vec x(d);
  for (double& v : x) v = rng.uniform(0.0, 1.0);
  return x;
}

LinearSoftmaxModel random_linear(Rng& rng, std::size_t d, std::size_t m) {
  Matrix w(m, d);
  for (double& v : w.data) v = rng.normal(0.0, 1.0);
  Vec b(m);
  for (double& v : b) v = rng.normal(0.0, 0.5);
  return LinearSoftmaxModel(std::move(w), std::move(b));
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("softmax") {
  const Vec p = softmax(Vec{0.0, 0.0});
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  const Vec sat = softmax(Vec{1000.0, 0.0});
  CHECK(sat[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sat[1] < 1e-12);
  CHECK(std::isfinite(sat[1]));

  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    Vec v(4);
    for (double& x : v) x = rng.uniform(-30, 30);
    const Vec a = softmax(v);
    double total = 0.0;
    for (double x : a) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const double c = rng.uniform(-100, 100);
    Vec shifted = v;
    for (double& x : shifted) x += c;
    const Vec b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
  }
}

TEST_CASE("cross_entropy") {
  CHECK(cross_entropy(Vec{0.0, 0.0}, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  // log(1 + e^-20), evaluated at 40 digits with mpmath.
  CHECK(cross_entropy(Vec{10.0, -10.0}, 0) == doctest::Approx(2.0611536203143807e-09).epsilon(1e-9));
  double prev = cross_entropy(Vec{-2.0, 1.0, 0.5}, 0);
  for (double z = -1.5; z < 5.0; z += 0.5) {
    const double cur = cross_entropy(Vec{z, 1.0, 0.5}, 0);
    CHECK(cur < prev);
    CHECK(cur >= 0.0);
    prev = cur;
  }
  CHECK(std::isfinite(cross_entropy(Vec{1e4, -1e4}, 1)));
  CHECK_THROWS_AS(cross_entropy(Vec{0.0, 0.0}, 2), std::out_of_range);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(Vec{1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(argmax(Vec{0.0, 0.0}) == 0);
  const ConstantModel tie(3, Vec{0.5, 0.5, 0.1});
  CHECK(tie.predict(Vec{0.0, 0.0, 0.0}) == 0);
}

TEST_CASE("linear model gradient, closed form") {
  const LinearSoftmaxModel m(Matrix::identity(2), Vec{0.0, 0.0});
  const auto lg = m.loss_and_input_grad(Vec{0.0, 0.0}, 0);
  CHECK(lg.grad == Vec{-0.5, 0.5});
  CHECK(lg.loss == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(m.loss_and_input_grad(Vec{0.0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(m.loss_and_input_grad(Vec{0.0, 0.0}, 2), std::out_of_range);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(2024);
  for (int t = 0; t < 40; ++t) {
    const std::size_t d = 2 + rng.below(12);
    const std::size_t m = 2 + rng.below(4);
    const std::size_t y = rng.below(m);
    const Vec x = random_point(rng, d);
    const auto lin = random_linear(rng, d, m);
    CHECK(rel_err(lin.loss_and_input_grad(x, y).grad, finite_diff_grad(lin, x, y)) < 1e-4);
    const auto tanh_mlp = MlpModel::random_init(d, 8, m, Activation::Tanh, rng.next_u64());
    CHECK(rel_err(tanh_mlp.loss_and_input_grad(x, y).grad, finite_diff_grad(tanh_mlp, x, y)) < 1e-4);
  }
}

TEST_CASE("relu MLP with a dead hidden layer has zero input gradient") {
  Matrix w1(3, 2);  // all zeros
  Vec b1(3, -1.0);  // every pre-activation negative
  Matrix w2(2, 3, 0.7);
  const MlpModel m(w1, b1, w2, Vec{0.1, -0.2}, Activation::Relu);
  CHECK(m.loss_and_input_grad(Vec{0.3, 0.9}, 1).grad == Vec{0.0, 0.0});
}

TEST_CASE("finite_diff_grad") {
  const ConstantModel c(4, Vec{0.2, -1.0, 3.0});
  CHECK(finite_diff_grad(c, Vec{0.1, 0.2, 0.3, 0.4}, 1) == Vec(4, 0.0));
  CHECK_THROWS_AS(finite_diff_grad(c, Vec(4, 0.0), 0, 0.0), std::invalid_argument);

  // Reflection: L'(x) = L(-x) under negated weights, so the central
  // difference at -x is exactly the negated estimate at x.
  Rng rng(9);
  const auto lin = random_linear(rng, 5, 3);
  Matrix neg_w = lin.weights();
  for (double& w : neg_w.data) w = -w;
  const LinearSoftmaxModel reflected(neg_w, lin.biases());
  const Vec x = random_point(rng, 5);
  Vec neg_x = x;
  for (double& v : neg_x) v = -v;
  const Vec g = finite_diff_grad(lin, x, 2);
  const Vec gr = finite_diff_grad(reflected, neg_x, 2);
  for (std::size_t i = 0; i < 5; ++i) CHECK(gr[i] == -g[i]);
}

TEST_CASE("forward is bit-reproducible") {
  const auto m = MlpModel::random_init(16, 10, 3, Activation::Relu, 77);
  Rng rng(1);
  const Vec x = random_point(rng, 16);
  const auto d0 = exact_digest(m.forward(x));
  const auto g0 = exact_digest(m.loss_and_input_grad(x, 2).grad);
  for (int i = 0; i < 10; ++i) {
    CHECK(exact_digest(m.forward(x)) == d0);
    CHECK(exact_digest(m.loss_and_input_grad(x, 2).grad) == g0);
  }
}

TEST_CASE("train_toy") {
  SyntheticParams p;
  p.kind = SyntheticKind::Blobs;
  p.n = 200;
  p.dim = 8;
  p.classes = 2;
  p.seed = 3;
  const auto data = generate_synthetic_dataset(p);

  const auto init = LinearSoftmaxModel::zeros(8, 2);
  const auto unchanged = train_toy(init, data, 0, 0.5, 1);
  CHECK(unchanged.weights().data == init.weights().data);

  const auto a = train_toy(init, data, 500, 0.5, 1);
  const auto b = train_toy(init, data, 500, 0.5, 1);
  CHECK(bit_equal(a.weights().data, b.weights().data));
  CHECK(bit_equal(a.biases(), b.biases()));

  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += a.predict(data.images[i].data) == data.labels[i];
  CHECK(static_cast<double>(hits) / data.size() >= 0.95);

  LabeledDataset empty;
  empty.num_classes = 2;
  CHECK_THROWS_AS(train_toy(init, empty, 10, 0.1, 0), std::invalid_argument);
}

TEST_CASE("model files round-trip bit-exactly") {
  Rng rng(31);
  const auto mlp = MlpModel::random_init(6, 5, 3, Activation::Tanh, 8);
  const auto lin = random_linear(rng, 6, 3);
  const ConstantModel cst(6, Vec{0.25, -1.0 / 3.0, 1e-300});
  const Vec x = random_point(rng, 6);
  for (const ClassifierModel* m : {static_cast<const ClassifierModel*>(&mlp),
                                   static_cast<const ClassifierModel*>(&lin),
                                   static_cast<const ClassifierModel*>(&cst)}) {
    const auto path = temp_path("pgdcd_model_roundtrip.txt");
    save_model(*m, path);
    const auto back = load_model(path);
    CHECK(back->arch() == m->arch());
    CHECK(bit_equal(back->forward(x), m->forward(x)));
    CHECK(serialize_model(*back) == serialize_model(*m));
  }
}

TEST_CASE("malformed model files raise structured errors") {
  const auto lin = LinearSoftmaxModel(Matrix::identity(2), Vec{0.5, -0.5});
  const std::string good = serialize_model(lin);

  auto code_of = [](const std::string& text) {
    try {
      parse_model(text);
    } catch (const FormatError& e) {
      return e.code();
    }
    FAIL("expected a FormatError");
    return FormatErrc::Io;
  };

  CHECK(code_of(good.substr(0, good.size() / 2)) == FormatErrc::Truncated);
  std::string wrong_dims = good;
  wrong_dims.replace(wrong_dims.find("dims 2 2"), 8, "dims 3 2");
  CHECK(code_of(wrong_dims) == FormatErrc::DimMismatch);
  std::string wrong_version = good;
  wrong_version.replace(0, 13, "pgdcd-model 9");
  CHECK(code_of(wrong_version) == FormatErrc::VersionMismatch);
  std::string bad_float = good;
  bad_float.replace(bad_float.find("tensor biases 2\n") + 16, 1, "z");
  CHECK(code_of(bad_float) == FormatErrc::Malformed);
  CHECK(code_of("hello") == FormatErrc::Malformed);
  CHECK_THROWS_AS(load_model("/nonexistent/dir/model.txt"), FormatError);
}

TEST_CASE("ImageVec enforces its domain") {
  CHECK_NOTHROW(ImageVec(Vec{0.0, 1.0}, 0.0, 1.0));
  CHECK_THROWS_AS(ImageVec(Vec{1.5}, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ImageVec(Vec{0.5}, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ImageVec(Vec{NAN}, 0.0, 1.0), std::invalid_argument);
}
