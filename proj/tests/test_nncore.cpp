#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

#include "vrprl/errors.hpp"
#include "vrprl/nn/checkpoint.hpp"
#include "vrprl/nn/optim.hpp"
#include "vrprl/nn/tape.hpp"

using namespace vrprl;
using namespace vrprl::nn;

namespace {

using Builder = std::function<Var(Tape&, const ParamStore&)>;

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Reverse-mode gradient of a scalar builder vs central differences.
double check_gradient(const ParamStore& store, const Builder& build) {
  Tape tape;
  Var out = build(tape, store);
  tape.backward(out);
  auto analytic = tape.param_grads();
  for (const auto& [name, t] : store.all())
    if (!analytic.count(name)) analytic[name] = Tensor(t.shape());
  auto f = [&build](const ParamStore& p) {
    Tape t(false);
    return build(t, p).item();
  };
  return grad_check(f, store, analytic);
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Var weighted(Tape& t, Var v) {
  Tensor w(v.value().shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7) - 0.05 * static_cast<double>(i);
  return reduce_sum(mul(v, t.constant(w)));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "vrprl_test_nncore" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("masked_softmax examples") {
  Tape t;
  auto p = masked_softmax(t.constant(Tensor::row({1, 1, 1})), {1, 0, 1});
  CHECK(p.value()[0] == doctest::Approx(0.5));
  CHECK(p.value()[1] == 0.0);
  CHECK(p.value()[2] == doctest::Approx(0.5));

  auto one = masked_softmax(t.constant(Tensor::row({3.0, -2.0, 7.5, 0.1})), {0, 1, 0, 0});
  CHECK(one.value().values() == std::vector<double>{0, 1, 0, 0});
  CHECK_THROWS_AS(masked_softmax(t.constant(Tensor::row({1, 2})), {0, 0}), ContractViolation);
  CHECK_THROWS_AS(masked_softmax(t.constant(Tensor::row({1, 2})), {1, 1, 1}), ShapeError);
}

TEST_CASE("masked_softmax sums to one and zeroes masked gradients exactly") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const int n = 2 + static_cast<int>(rng.below(10));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n));
    for (auto& m : mask) m = rng.uniform() < 0.6;
    mask[rng.below(static_cast<std::uint64_t>(n))] = 1;
    Tape t;
    auto x = t.input(random_tensor({1, n}, rng, -5, 5));
    auto p = masked_softmax(x, mask);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = p.value()[static_cast<std::size_t>(i)];
      if (!mask[static_cast<std::size_t>(i)]) CHECK(v == 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    int target = 0;
    while (!mask[static_cast<std::size_t>(target)]) ++target;
    t.backward(log_at(p, target));
    const auto& g = t.grad(x);
    for (int i = 0; i < n; ++i)
      if (!mask[static_cast<std::size_t>(i)]) CHECK(g[static_cast<std::size_t>(i)] == 0.0);
  }
}

TEST_CASE("tanh derivative at zero") {
  Tape t;
  auto x = t.input(Tensor::scalar(0.0));
  t.backward(reduce_sum(nn::tanh(x)));
  CHECK(t.grad(x)[0] == 1.0);
}

TEST_CASE("grad_check on a quadratic") {
  ParamStore p;
  Rng rng(3);
  p.add("w", random_tensor({4, 5}, rng));
  Grads g{{"w", p.get("w")}};
  nn::scale(g, 2.0);
  auto f = [](const ParamStore& s) { return s.get("w").squared_norm(); };
  CHECK(grad_check(f, p, g) < 1e-8);
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(11);
  ParamStore p;
  p.add("a", random_tensor({3, 4}, rng));
  p.add("b", random_tensor({4, 2}, rng));
  p.add("c", random_tensor({3, 4}, rng));
  p.add("r", random_tensor({4}, rng));
  p.add("n", random_tensor({2, 4}, rng));

  std::map<std::string, Builder> cases{
      {"matmul", [](Tape& t, const ParamStore& s) { return weighted(t, matmul(t.param(s, "a"), t.param(s, "b"))); }},
      {"matmul_nt",
       [](Tape& t, const ParamStore& s) { return weighted(t, matmul_nt(t.param(s, "a"), t.param(s, "n"))); }},
      {"add", [](Tape& t, const ParamStore& s) { return weighted(t, add(t.param(s, "a"), t.param(s, "c"))); }},
      {"add_row", [](Tape& t, const ParamStore& s) { return weighted(t, add_row(t.param(s, "a"), t.param(s, "r"))); }},
      {"scale", [](Tape& t, const ParamStore& s) { return weighted(t, nn::scale(t.param(s, "a"), -1.7)); }},
      {"mul", [](Tape& t, const ParamStore& s) { return weighted(t, mul(t.param(s, "a"), t.param(s, "c"))); }},
      {"concat", [](Tape& t, const ParamStore& s) {
         return weighted(t, concat_cols(t.param(s, "a"), t.param(s, "c")));
       }},
      {"slice", [](Tape& t, const ParamStore& s) { return weighted(t, slice_cols(t.param(s, "a"), 1, 3)); }},
      {"select_row", [](Tape& t, const ParamStore& s) { return weighted(t, select_row(t.param(s, "a"), 2)); }},
      {"tanh", [](Tape& t, const ParamStore& s) { return weighted(t, nn::tanh(t.param(s, "a"))); }},
      {"sigmoid", [](Tape& t, const ParamStore& s) { return weighted(t, sigmoid(t.param(s, "a"))); }},
      {"relu", [](Tape& t, const ParamStore& s) { return weighted(t, relu(t.param(s, "a"))); }},
      {"softmax", [](Tape& t, const ParamStore& s) { return weighted(t, softmax(t.param(s, "r"))); }},
      {"masked_softmax",
       [](Tape& t, const ParamStore& s) { return weighted(t, masked_softmax(t.param(s, "r"), {1, 0, 1, 1})); }},
      {"log_at", [](Tape& t, const ParamStore& s) { return log_at(softmax(t.param(s, "r")), 2); }},
      {"pool_rows", [](Tape& t, const ParamStore& s) {
         return weighted(t, pool_rows(softmax(t.param(s, "r")), t.param(s, "b")));
       }},
      {"embedding_affine", [](Tape& t, const ParamStore& s) {
         return weighted(t, embedding_affine(t.param(s, "a"), t.param(s, "n"), select_row(t.param(s, "b"), 0)));
       }},
  };
  for (const auto& [name, build] : cases) {
    CAPTURE(name);
    CHECK(check_gradient(p, build) < 1e-6);
  }
}

TEST_CASE("pool_rows agrees with matmul and ignores row order") {
  Rng rng(12);
  const Tensor w = random_tensor({1, 9}, rng);
  const Tensor a = random_tensor({9, 5}, rng, -3.0, 3.0);
  Tape t(false);
  const Tensor pooled = pool_rows(t.constant(w), t.constant(a)).value();
  const Tensor ref = matmul(t.constant(w), t.constant(a)).value();
  for (std::size_t j = 0; j < 5; ++j) CHECK(pooled[j] == doctest::Approx(ref[j]).epsilon(1e-14));

  std::vector<int> perm{4, 7, 0, 2, 8, 1, 6, 3, 5};
  Tensor wp = w, ap = a;
  for (int i = 0; i < 9; ++i) {
    wp[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    for (int j = 0; j < 5; ++j) ap.at(i, j) = a.at(perm[static_cast<std::size_t>(i)], j);
  }
  CHECK(pool_rows(t.constant(wp), t.constant(ap)).value() == pooled);

  Tensor x = random_tensor({1, 9}, rng, -4.0, 4.0), xp = x;
  for (int i = 0; i < 9; ++i) xp[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  const Tensor sx = softmax(t.constant(x)).value();
  const Tensor sp = softmax(t.constant(xp)).value();
  for (int i = 0; i < 9; ++i)
    CHECK(sp[static_cast<std::size_t>(i)] == sx[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);

  CHECK_THROWS_AS(pool_rows(t.constant(Tensor::matrix(1, 4)), t.constant(a)), ShapeError);
}

TEST_CASE("shape errors and numeric health") {
  Tape t;
  auto a = t.constant(Tensor::matrix(2, 3, 1.0));
  auto b = t.constant(Tensor::matrix(2, 3, 1.0));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, t.constant(Tensor::matrix(3, 2))), ShapeError);
  CHECK_THROWS_AS(slice_cols(a, 2, 5), ShapeError);
  CHECK_THROWS_AS(select_row(a, 2), ShapeError);
  CHECK_THROWS_AS(nn::scale(t.constant(Tensor::scalar(1e300)), 1e300), NumericHealthError);
  CHECK_THROWS_AS(log_at(t.constant(Tensor::row({1.0, 0.0})), 1), NumericHealthError);
}

TEST_CASE("lstm cell with zero parameters") {
  const int d = 3;
  Tape t;
  Tensor c0 = Tensor::row({0.4, -1.2, 2.0});
  auto zero_wx = t.constant(Tensor::matrix(4 * d, d));
  auto zero_wh = t.constant(Tensor::matrix(4 * d, d));
  auto zero_b = t.constant(Tensor({4 * d}));
  auto x = t.constant(Tensor::row({0.3, 0.1, -0.2}));
  auto out = lstm_cell(x, t.constant(Tensor::row({0.5, 0.5, 0.5})), t.constant(c0), zero_wx, zero_wh, zero_b);
  for (int i = 0; i < d; ++i) {
    const auto k = static_cast<std::size_t>(i);
    CHECK(out.c.value()[k] == doctest::Approx(0.5 * c0[k]).epsilon(1e-15));
    CHECK(out.h.value()[k] == doctest::Approx(0.5 * std::tanh(0.5 * c0[k])).epsilon(1e-15));
  }
  auto zero = lstm_cell(t.constant(Tensor({1, d})), t.constant(Tensor({1, d})), t.constant(Tensor({1, d})), zero_wx,
                        zero_wh, zero_b);
  for (double v : zero.h.value().values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(lstm_cell(x, x, x, t.constant(Tensor::matrix(4 * d, d + 1)), zero_wh, zero_b), ShapeError);
}

TEST_CASE("lstm cell matches a hand-written cell and finite differences") {
  const int d = 4, in = 3;
  Rng rng(5);
  ParamStore p;
  p.add("wx", random_tensor({4 * d, in}, rng, -0.5, 0.5));
  p.add("wh", random_tensor({4 * d, d}, rng, -0.5, 0.5));
  p.add("b", random_tensor({4 * d}, rng, -0.5, 0.5));
  p.add("x", random_tensor({1, in}, rng));
  p.add("h", random_tensor({1, d}, rng));
  p.add("c", random_tensor({1, d}, rng));

  Tape t;
  auto out = lstm_cell(t.param(p, "x"), t.param(p, "h"), t.param(p, "c"), t.param(p, "wx"), t.param(p, "wh"),
                       t.param(p, "b"));
  const auto& wx = p.get("wx");
  const auto& wh = p.get("wh");
  for (int j = 0; j < d; ++j) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const int r = g * d + j;
      z[g] = p.get("b")[static_cast<std::size_t>(r)];
      for (int k = 0; k < in; ++k) z[g] += wx.at(r, k) * p.get("x")[static_cast<std::size_t>(k)];
      for (int k = 0; k < d; ++k) z[g] += wh.at(r, k) * p.get("h")[static_cast<std::size_t>(k)];
    }
    const double c = sigmoid_ref(z[1]) * p.get("c")[static_cast<std::size_t>(j)] + sigmoid_ref(z[0]) * std::tanh(z[2]);
    CHECK(out.c.value()[static_cast<std::size_t>(j)] == doctest::Approx(c).epsilon(1e-13));
    CHECK(out.h.value()[static_cast<std::size_t>(j)] ==
          doctest::Approx(sigmoid_ref(z[3]) * std::tanh(c)).epsilon(1e-13));
  }

  auto loss = [](Tape& tp, const ParamStore& s) {
    auto o = lstm_cell(tp.param(s, "x"), tp.param(s, "h"), tp.param(s, "c"), tp.param(s, "wx"), tp.param(s, "wh"),
                       tp.param(s, "b"));
    return add(weighted(tp, o.h), nn::scale(weighted(tp, o.c), 0.3));
  };
  CHECK(check_gradient(p, loss) < 1e-4);
}

TEST_CASE("dropout") {
  Rng rng(9);
  Tape t;
  auto x = t.constant(random_tensor({5, 40}, rng));
  auto same = dropout(x, 0.0, rng);
  CHECK(same.value() == x.value());
  auto d = dropout(x, 0.5, rng);
  int zeros = 0;
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    const double v = d.value()[i];
    if (v == 0.0)
      ++zeros;
    else
      CHECK(v == doctest::Approx(2.0 * x.value()[i]));
  }
  CHECK(zeros > 60);
  CHECK(zeros < 140);
  CHECK_THROWS_AS(dropout(x, 1.0, rng), ConfigError);
}

TEST_CASE("Adam first step moves by about lr against the gradient sign") {
  ParamStore p;
  p.add("w", Tensor::row({0.5, -0.25, 1.0}));
  auto opt = OptimizerState::adam(1e-3);
  Grads g{{"w", Tensor::row({0.3, -7.0, 1e-3})}};
  const auto v0 = p.version();
  adam_step(p, g, opt);
  CHECK(p.version() == v0 + 1);
  CHECK(p.get("w")[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(p.get("w")[1] == doctest::Approx(-0.25 + 1e-3).epsilon(1e-6));
  CHECK(p.get("w")[2] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(opt.step == 1);
}

TEST_CASE("zero gradient leaves parameters and decays moments") {
  ParamStore p;
  p.add("w", Tensor::row({0.5, -0.25}));
  auto opt = OptimizerState::adam(1e-3);
  adam_step(p, {{"w", Tensor::row({1.0, 1.0})}}, opt);
  const auto m1 = opt.m.at("w");
  const auto v1 = opt.v.at("w");
  // Moments decay under a zero gradient; parameters stay put only while
  // the first moment is still zero (fresh state, below).
  adam_step(p, {}, opt);
  CHECK(opt.m.at("w")[0] == doctest::Approx(0.9 * m1[0]));
  CHECK(opt.v.at("w")[0] == doctest::Approx(0.999 * v1[0]));

  ParamStore fresh;
  fresh.add("w", Tensor::row({0.5, -0.25}));
  auto before = fresh.get("w");
  auto opt2 = OptimizerState::adam();
  adam_step(fresh, {{"w", Tensor::row({0.0, 0.0})}}, opt2);
  CHECK(fresh.get("w") == before);
  auto opt3 = OptimizerState::rmsprop();
  rmsprop_step(fresh, {{"w", Tensor::row({0.0, 0.0})}}, opt3);
  CHECK(fresh.get("w") == before);
}

TEST_CASE("RMSProp first step") {
  ParamStore p;
  p.add("w", Tensor::row({1.0}));
  auto opt = OptimizerState::rmsprop(1e-2);
  rmsprop_step(p, {{"w", Tensor::row({2.0})}}, opt);
  const double v = 0.1 * 4.0;
  CHECK(p.get("w")[0] == doctest::Approx(1.0 - 1e-2 * 2.0 / (std::sqrt(v) + 1e-8)).epsilon(1e-14));
}

TEST_CASE("optimizer rejects unknown names and wrong shapes untouched") {
  ParamStore p;
  p.add("w", Tensor::row({1.0, 2.0}));
  auto opt = OptimizerState::adam();
  CHECK_THROWS_AS(adam_step(p, {{"nope", Tensor::row({1.0})}}, opt), ShapeError);
  CHECK_THROWS_AS(adam_step(p, {{"w", Tensor::row({1.0})}}, opt), ShapeError);
  CHECK(p.get("w") == Tensor::row({1.0, 2.0}));
  CHECK(opt.step == 0);
}

TEST_CASE("optimizer trajectories are deterministic") {
  auto run = [] {
    Rng rng(4);
    ParamStore p;
    p.add("a", xavier_init({6, 5}, rng));
    p.add("b", xavier_init({6}, rng));
    auto opt = OptimizerState::adam();
    for (int k = 0; k < 20; ++k) {
      Grads g{{"a", random_tensor({6, 5}, rng)}, {"b", random_tensor({6}, rng)}};
      clip_global_norm(g, 2.0);
      adam_step(p, g, opt);
    }
    return std::make_pair(p, opt);
  };
  auto [p1, o1] = run();
  auto [p2, o2] = run();
  CHECK(p1 == p2);
  CHECK(o1 == o2);
}

TEST_CASE("global norm clipping") {
  Grads g{{"a", Tensor::row({0.0, 4.0})}};
  CHECK(clip_global_norm(g, 2.0) == doctest::Approx(4.0));
  CHECK(g["a"][1] == doctest::Approx(2.0));
  CHECK(global_norm(g) == doctest::Approx(2.0));

  Grads small{{"a", Tensor::row({0.6, 0.8})}};
  clip_global_norm(small, 2.0);
  CHECK(small["a"] == Tensor::row({0.6, 0.8}));

  Rng rng(6);
  Grads big{{"a", random_tensor({3, 3}, rng, -5, 5)}, {"b", random_tensor({4}, rng, -5, 5)}};
  const Grads before = big;
  const double n0 = clip_global_norm(big, 2.0);
  CHECK(n0 > 2.0);
  double dot = 0.0;
  for (const auto& [k, t] : big)
    for (std::size_t i = 0; i < t.size(); ++i) dot += t[i] * before.at(k)[i];
  CHECK(dot / (global_norm(big) * n0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Xavier initialisation") {
  Rng rng(7);
  auto w = xavier_init({128, 128}, rng);
  const double bound = std::sqrt(6.0 / 256.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);

  Rng a(5), b(5);
  CHECK(xavier_init({10, 20}, a) == xavier_init({10, 20}, b));

  Rng big(8);
  auto draws = xavier_init({1000, 1000}, big);
  double mean = 0.0, sq = 0.0;
  for (double v : draws.values()) {
    mean += v;
    sq += v * v;
  }
  mean /= 1e6;
  const double var = sq / 1e6 - mean * mean;
  const double expected = 2.0 / 2000.0;
  CHECK(std::abs(var - expected) / expected < 0.05);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(12);
  Checkpoint c;
  c.meta["actor.embed_dim"] = "128";
  c.meta["note"] = "hello world";
  c.groups["actor"].add("w", random_tensor({7, 3}, rng, -1e3, 1e3));
  c.groups["actor"].add("v", Tensor::row({std::nextafter(0.0, 1.0), -0.0, 1e-300, 0.1}));
  c.groups["opt.actor.m"].add("w", random_tensor({7, 3}, rng));
  auto dir = temp_dir("roundtrip");
  save_checkpoint(c, dir);
  auto back = load_checkpoint(dir);
  CHECK(back.meta == c.meta);
  REQUIRE(back.groups.size() == 2);
  for (const auto& [g, store] : c.groups)
    for (const auto& [name, t] : store.all()) {
      const auto& u = back.groups.at(g).get(name);
      CHECK(u.shape() == t.shape());
      CHECK(std::memcmp(u.data(), t.data(), t.size() * sizeof(double)) == 0);
    }

  // Overwriting replaces the blob and leaves one manifest.
  c.groups["actor"].get_mutable("w")[0] = 42.0;
  save_checkpoint(c, dir);
  CHECK(load_checkpoint(dir).groups.at("actor").get("w")[0] == 42.0);
  int blobs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".bin") ++blobs;
  CHECK(blobs == 1);
}

TEST_CASE("damaged checkpoints fail to load") {
  Checkpoint c;
  c.groups["actor"].add("w", Tensor::matrix(4, 4, 0.5));
  auto dir = temp_dir("damaged");
  save_checkpoint(c, dir);
  std::filesystem::path blob;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".bin") blob = e.path();
  REQUIRE_FALSE(blob.empty());
  std::filesystem::resize_file(blob, std::filesystem::file_size(blob) - 8);
  CHECK_THROWS_AS(load_checkpoint(dir), LoadError);

  save_checkpoint(c, dir);
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".bin") blob = e.path();
  {
    std::fstream f(blob, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_checkpoint(dir), LoadError);

  save_checkpoint(c, dir);
  std::string text;
  {
    std::ifstream in(dir / "manifest.txt");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  text.replace(text.find("vrprl-checkpoint 1"), 18, "vrprl-checkpoint 9");
  {
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    out << text;
  }
  CHECK_THROWS_AS(load_checkpoint(dir), LoadError);
  CHECK_THROWS_AS(load_checkpoint(temp_dir("empty")), LoadError);
}

TEST_CASE("architecture mismatch is reported") {
  Checkpoint c;
  c.meta["actor.embed_dim"] = "128";
  c.groups["actor"].add("w", Tensor::matrix(128, 2));
  ParamStore target;
  target.add("w", Tensor::matrix(64, 2));
  CHECK_THROWS_AS(load_group_into(c, "actor", target), LoadError);
  CHECK_THROWS_AS(require_meta(c, {{"actor.embed_dim", "64"}}), LoadError);
  CHECK_NOTHROW(require_meta(c, {{"actor.embed_dim", "128"}}));
  CHECK_THROWS_AS(load_group_into(c, "critic", target), LoadError);
  ParamStore ok;
  ok.add("w", Tensor::matrix(128, 2, 9.0));
  load_group_into(c, "actor", ok);
  CHECK(ok.get("w")[0] == 0.0);
}

TEST_CASE("param store basics") {
  ParamStore p;
  p.add("a.x", Tensor::matrix(2, 3));
  p.add("a.y", Tensor({4}));
  p.add("b", Tensor::scalar(1.0));
  CHECK(p.parameter_count() == 11);
  CHECK(p.names_with_prefix("a.") == std::vector<std::string>{"a.x", "a.y"});
  CHECK_THROWS(p.add("b", Tensor::scalar(2.0)));
  CHECK_THROWS(p.get("zzz"));
}
