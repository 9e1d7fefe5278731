#include "compsearch/error.hpp"
#include "compsearch/training/adamw.hpp"
#include "compsearch/training/grad_check.hpp"
#include "compsearch/training/lora.hpp"
#include "compsearch/training/params.hpp"

#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace compsearch;
using namespace compsearch::training;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n;
  return Eigen::MatrixXd::NullaryExpr(r, c, [&] { return n(rng); });
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("lora zero-init update equals the frozen base") {
  std::mt19937_64 rng(1);
  const auto base = gaussian(rng, 12, 20);
  const auto lora = LoraAdapter::init(base, 4, 8.0, 0.0, rng);
  CHECK(lora.b().isZero());
  const auto x = gaussian(rng, 20, 7);
  CHECK((lora.forward(x, false) - base * x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(lora.scale() == 2.0);
}

TEST_CASE("lora trainable parameter count") {
  std::mt19937_64 rng(2);
  CHECK(LoraAdapter::init(gaussian(rng, 64, 64), 16, 32.0, 0.5, rng).trainable_parameter_count() == 2048);
  CHECK(LoraAdapter::init(gaussian(rng, 10, 30), 3, 6.0, 0.5, rng).trainable_parameter_count() == 120);
}

TEST_CASE("lora merge equivalence") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    LoraAdapter lora(gaussian(rng, 8, 11), gaussian(rng, 4, 11), gaussian(rng, 8, 4), 8.0, 0.3);
    const auto x = gaussian(rng, 11, 5);
    CHECK((lora.forward(x, false) - lora.merge() * x).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::VectorXd v = x.col(0);
    CHECK((lora.forward(v) - lora.merge() * v).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("lora rejects bad shapes and dropout") {
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(LoraAdapter(gaussian(rng, 8, 11), gaussian(rng, 4, 10), gaussian(rng, 8, 4), 8.0, 0.0), Error);
  CHECK_THROWS_AS(LoraAdapter(gaussian(rng, 8, 11), gaussian(rng, 4, 11), gaussian(rng, 8, 3), 8.0, 0.0), Error);
  CHECK_THROWS_AS(LoraAdapter(gaussian(rng, 8, 11), gaussian(rng, 4, 11), gaussian(rng, 8, 4), 8.0, 1.0), Error);
  const auto lora = LoraAdapter(gaussian(rng, 8, 11), gaussian(rng, 4, 11), gaussian(rng, 8, 4), 8.0, 0.0);
  CHECK_THROWS_AS(lora.forward(gaussian(rng, 10, 2), false), Error);
}

TEST_CASE("dropout mask is inverted dropout") {
  std::mt19937_64 rng(5);
  const auto m = dropout_mask(200, 200, 0.25, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
  }
  CHECK(m.mean() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("lora backward matches finite differences with a fixed dropout mask") {
  std::mt19937_64 rng(6);
  const auto base = gaussian(rng, 6, 9);
  const auto a0 = gaussian(rng, 3, 9);
  const auto b0 = gaussian(rng, 6, 3);
  const auto x = gaussian(rng, 9, 4);
  const auto w = gaussian(rng, 6, 4);
  const std::uint64_t mask_seed = 99;
  const DifferentiableFn fn = [&](const Eigen::VectorXd& th) {
    LoraAdapter lora(base, th.head(27).reshaped(3, 9), th.tail(18).reshaped(6, 3), 6.0, 0.4);
    std::mt19937_64 mask_rng(mask_seed);
    LoraAdapter::Trace trace;
    const auto y = lora.forward(x, true, &mask_rng, &trace);
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(3, 9), db = Eigen::MatrixXd::Zero(6, 3);
    lora.backward(trace, w, da, db);
    LossAndGradient out{(w.array() * y.array()).sum(), Eigen::VectorXd(45)};
    out.gradient << da.reshaped(), db.reshaped();
    return out;
  };
  Eigen::VectorXd theta(45);
  theta << a0.reshaped(), b0.reshaped();
  CHECK(grad_check(fn, theta, {}, rng).max_rel_error < 1e-6);

  // Input gradient.
  LoraAdapter lora(base, a0, b0, 6.0, 0.4);
  const DifferentiableFn by_x = [&](const Eigen::VectorXd& th) {
    std::mt19937_64 mask_rng(mask_seed);
    LoraAdapter::Trace trace;
    const auto y = lora.forward(th.reshaped(9, 4), true, &mask_rng, &trace);
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(3, 9), db = Eigen::MatrixXd::Zero(6, 3);
    return LossAndGradient{(w.array() * y.array()).sum(), lora.backward(trace, w, da, db).reshaped()};
  };
  CHECK(grad_check(by_x, x.reshaped(), {}, rng).max_rel_error < 1e-6);
}

TEST_CASE("warmup schedule") {
  CHECK(warmup_lr(0, 1e-5, 1000) == 0.0);
  CHECK(warmup_lr(500, 1e-5, 1000) == doctest::Approx(5e-6).epsilon(1e-15));
  CHECK(warmup_lr(1000, 1e-5, 1000) == 1e-5);
  CHECK(warmup_lr(5000, 1e-5, 1000) == 1e-5);
  CHECK(warmup_lr(3, 1e-5, 0) == 1e-5);
}

TEST_CASE("adamw_step") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd p = gaussian(rng, 3, 4);
  const Eigen::MatrixXd before = p;
  AdamWState state;
  adamw_step(p, Eigen::MatrixXd::Zero(3, 4), state, 1e-3, 0.0);
  CHECK(bitwise_equal(p, before));

  // First step with bias correction moves every coordinate by lr * g / (|g| + eps),
  // after decay p *= 1 - lr * wd.
  Eigen::MatrixXd q = before;
  AdamWState fresh;
  const Eigen::MatrixXd g = gaussian(rng, 3, 4);
  adamw_step(q, g, fresh, 0.01, 0.5);
  const Eigen::MatrixXd expected = before * (1.0 - 0.01 * 0.5) - 0.01 * (g.array() / (g.array().abs() + 1e-8)).matrix();
  CHECK((q - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fresh.step == 1);

  // Scalar reference for two more steps.
  double x = 1.0, m = 0.0, v = 0.0;
  Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 1, 1.0);
  AdamWState s1;
  const double lr = 0.1, wd = 0.2, grads[3] = {0.5, -1.5, 2.0};
  for (int t = 1; t <= 3; ++t) {
    const double gt = grads[t - 1];
    x *= 1.0 - lr * wd;
    m = 0.9 * m + 0.1 * gt;
    v = 0.999 * v + 0.001 * gt * gt;
    x -= lr * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    adamw_step(one, Eigen::MatrixXd::Constant(1, 1, gt), s1, lr, wd);
    CHECK(one(0, 0) == doctest::Approx(x).epsilon(1e-14));
  }
  CHECK_THROWS_AS(adamw_step(one, Eigen::MatrixXd::Zero(2, 1), s1, lr, wd), Error);
}

TEST_CASE("AdamW over a ParameterSet leaves frozen blocks bitwise unchanged") {
  std::mt19937_64 rng(8);
  ParameterSet params;
  const auto base = gaussian(rng, 6, 10);
  const auto lora = LoraAdapter::init(base, 2, 4.0, 0.0, rng);
  const auto ib = params.add("base", lora.base(), false, false);
  const auto ia = params.add("A", lora.a(), true, true);
  const auto ibb = params.add("B", lora.b(), true, true);
  const auto ibias = params.add("bias", Eigen::MatrixXd::Ones(3, 1), true, false);
  CHECK_THROWS_AS(params.add("A", Eigen::MatrixXd::Zero(1, 1), true, true), Error);
  CHECK(params.trainable_count() == 2 * 10 + 6 * 2 + 3);
  AdamW opt;
  for (int step = 0; step < 100; ++step) {
    auto grads = params.zeros_like();
    for (auto& g : grads) g = gaussian(rng, g.rows(), g.cols());
    opt.step(params, grads, 1e-2, 0.5);
  }
  CHECK(bitwise_equal(params[ib].value, base));
  CHECK_FALSE(params[ia].value.isApprox(lora.a()));
  CHECK_FALSE(params[ibb].value.isZero());
  CHECK(opt.steps_taken() == 100);

  // No decay on "bias": with zero gradient it stays put while decayed blocks shrink.
  ParameterSet two;
  two.add("w", Eigen::MatrixXd::Ones(2, 2), true, true);
  two.add("b", Eigen::MatrixXd::Ones(2, 1), true, false);
  AdamW opt2;
  opt2.step(two, two.zeros_like(), 0.1, 0.5);
  CHECK(two[0].value(0, 0) == doctest::Approx(0.95));
  CHECK(two[1].value(0, 0) == 1.0);
  (void)ibias;
}

TEST_CASE("parameter flattening and checkpoints") {
  std::mt19937_64 rng(9);
  ParameterSet params;
  params.add("frozen", gaussian(rng, 2, 3), false, false);
  params.add("w", gaussian(rng, 3, 2), true, true);
  params.add("log_tau", Eigen::MatrixXd::Constant(1, 1, 0.25), true, false);
  CHECK(params.index_of("w") == 1);
  CHECK_THROWS_AS(params.index_of("nope"), Error);

  const auto flat = params.flatten_trainable();
  CHECK(flat.size() == 7);
  params.assign_trainable(flat * 2.0);
  CHECK(params[2].value(0, 0) == 0.5);

  const auto dir = std::filesystem::temp_directory_path() / "compsearch_test_ckpt";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "c.bin", params);
  ParameterSet other = params;
  for (std::size_t i = 0; i < other.size(); ++i) other[i].value.setZero();
  load_checkpoint(dir / "c.bin", other);
  for (std::size_t i = 0; i < other.size(); ++i) CHECK(bitwise_equal(other[i].value, params[i].value));

  std::ifstream in(dir / "c.bin", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "CSK1");
  CHECK(std::filesystem::file_size(dir / "c.bin") == 4 + (4 + 6 + 4 + 48) + (4 + 1 + 4 + 48) + (4 + 7 + 4 + 8));

  std::filesystem::resize_file(dir / "c.bin", 30);
  CHECK_THROWS_AS(load_checkpoint(dir / "c.bin", other), Error);
  ParameterSet renamed;
  renamed.add("something_else", Eigen::MatrixXd::Zero(1, 1), true, true);
  save_checkpoint(dir / "d.bin", renamed);
  CHECK_THROWS_AS(load_checkpoint(dir / "d.bin", other), Error);
}
