#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "simproto/error.hpp"
#include "simproto/model.hpp"
#include "test_support.hpp"

using namespace simproto;
using testing::bitwise_equal;
using testing::to_grid;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Matrix random_prototype(std::mt19937_64& rng, int c) {
  std::uniform_real_distribution<double> off(0.05, 0.9);
  Matrix s = Matrix::Identity(c, c);
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) s(i, j) = s(j, i) = off(rng);
  }
  return s;
}

// Two Gaussian blobs split by the hyperplane x0 = 0 with a margin of 1.
FeatureSet separable(std::mt19937_64& rng, int per_class) {
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> offset(1.0, 2.0);
  FeatureSet set;
  set.features.resize(2 * per_class, 3);
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    set.features(i, 0) = (label ? 1.0 : -1.0) * offset(rng);
    set.features(i, 1) = noise(rng);
    set.features(i, 2) = noise(rng);
    set.labels.push_back(label);
  }
  return set;
}

TrainData toy_data(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrainData data{separable(rng, 40), separable(rng, 40), Matrix()};
  data.prototype.resize(2, 2);
  data.prototype << 1, 0.3, 0.3, 1;
  return data;
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Config;
}

bool same_reports(const TrainReport& a, const TrainReport& b) {
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto& x = a.epochs[i];
    const auto& y = b.epochs[i];
    if (x.epoch != y.epoch || x.sigma != y.sigma || x.hard != y.hard || x.loss != y.loss ||
        x.cross_entropy != y.cross_entropy || x.inter != y.inter || x.intra != y.intra ||
        x.train_accuracy != y.train_accuracy || x.test_accuracy != y.test_accuracy) {
      return false;
    }
  }
  return a.test_accuracy == b.test_accuracy && a.confusion.counts == b.confusion.counts;
}

}  // namespace

TEST_CASE("forward pass") {
  SUBCASE("zero parameters give zero logits") {
    MlpClassifier model({4, 6, 3});
    std::mt19937_64 rng(1);
    CHECK(model.forward(random_matrix(rng, 5, 4)) == Matrix::Zero(5, 3));
  }
  SUBCASE("an identity layer passes inputs through") {
    MlpClassifier model({3, 3});
    model.layers()[0].weight.setIdentity();
    std::mt19937_64 rng(2);
    const auto x = random_matrix(rng, 4, 3);
    CHECK(model.forward(x) == x);
  }
  SUBCASE("random networks match the loop oracle") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
      std::vector<int> dims{1 + static_cast<int>(rng() % 10)};
      const int depth = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < depth; ++k) dims.push_back(1 + static_cast<int>(rng() % 12));
      const auto model = MlpClassifier::initialized(dims, rng());
      const auto x = random_matrix(rng, 7, dims.front());
      std::vector<oracle::Grid> weights;
      std::vector<std::vector<double>> biases;
      for (const auto& l : model.layers()) {
        weights.push_back(to_grid(l.weight));
        biases.emplace_back(l.bias.begin(), l.bias.end());
      }
      const auto expected = oracle::mlp_forward(to_grid(x), weights, biases);
      const auto logits = model.forward(x);
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
          CHECK(std::abs(logits(i, j) - expected[i][j]) < 1e-12);
        }
      }
    }
  }
  SUBCASE("width mismatch") {
    MlpClassifier model({3, 2});
    CHECK(code_of([&] { model.forward(Matrix::Zero(1, 4)); }) == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  const auto a = MlpClassifier::initialized({16, 8, 3}, 5);
  const auto b = MlpClassifier::initialized({16, 8, 3}, 5);
  const auto c = MlpClassifier::initialized({16, 8, 3}, 6);
  CHECK(bitwise_equal(a.layers()[0].weight, b.layers()[0].weight));
  CHECK(!bitwise_equal(a.layers()[0].weight, c.layers()[0].weight));
  CHECK(a.layers()[0].weight.cwiseAbs().maxCoeff() <= 0.25);
  CHECK(a.layers()[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(a.parameter_count() == 16 * 8 + 8 + 8 * 3 + 3);
}

TEST_CASE("hard-label backprop equals the textbook softmax gradient") {
  std::mt19937_64 rng(4);
  const auto model = MlpClassifier::initialized({5, 4}, 9);
  const auto x = random_matrix(rng, 6, 5);
  const std::vector<int> y{0, 3, 1, 1, 2, 0};
  const auto r = loss_and_grad(model, x, y, hard_labels(4), Matrix(), std::nullopt);

  Matrix delta = model.forward(x);
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    const double m = delta.row(i).maxCoeff();
    delta.row(i) = (delta.row(i).array() - m).exp();
    delta.row(i) /= delta.row(i).sum();
    delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  delta /= 6.0;
  CHECK((r.grads[0].weight - x.transpose() * delta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.grads[0].bias - delta.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parameter gradients match central differences") {
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  const BclReduction reductions[] = {BclReduction::MeanInter, BclReduction::NonzeroInterIntra,
                                     BclReduction::MeanInterIntra, BclReduction::NonzeroInter};
  for (int t = 0; t < 16; ++t) {
    const int c = t % 2 ? 3 : 5;
    auto model = MlpClassifier::initialized({4, 6, c}, 100 + t);
    const auto x = random_matrix(rng, 8, 4);
    std::vector<int> y(8);
    for (auto& v : y) v = static_cast<int>(rng() % c);
    const auto s = random_prototype(rng, c);
    const auto labels = t % 4 < 2 ? hard_labels(c) : unify_confidence(s, 0.6);
    std::optional<BclConfig> bcl;
    if (t >= 4) {
      bcl = BclConfig{t % 3 ? ThresholdIndexing::EntryLookup : ThresholdIndexing::RowProduct,
                      t % 5 ? PairSimilarity::CosineOnLogits : PairSimilarity::EuclideanExpOnLogits,
                      reductions[t % 4]};
    }
    const auto r = loss_and_grad(model, x, y, labels, s, bcl);
    const auto total = [&] { return loss_and_grad(model, x, y, labels, s, bcl).loss.total; };

    double worst = 0.0;
    for (std::size_t k = 0; k < model.layers().size(); ++k) {
      for (int which = 0; which < 2; ++which) {
        double* p = which ? model.layers()[k].bias.data() : model.layers()[k].weight.data();
        const Eigen::Index n = which ? model.layers()[k].bias.size() : model.layers()[k].weight.size();
        const double* g = which ? r.grads[k].bias.data() : r.grads[k].weight.data();
        double scale = 0.0;
        std::vector<double> numeric(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
          const double keep = p[i];
          p[i] = keep + h;
          const double up = total();
          p[i] = keep - h;
          const double down = total();
          p[i] = keep;
          numeric[static_cast<std::size_t>(i)] = (up - down) / (2 * h);
          scale = std::max(scale, std::abs(g[i]));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          worst = std::max(worst, std::abs(g[i] - numeric[static_cast<std::size_t>(i)]) /
                                      std::max(scale, 1e-6));
        }
      }
    }
    CAPTURE(t);
    CHECK(worst < (bcl ? 1e-4 : 1e-6));
  }
}

TEST_CASE("a duplicated batch gives the same cross-entropy gradients") {
  std::mt19937_64 rng(6);
  const auto model = MlpClassifier::initialized({5, 7, 3}, 11);
  const auto x = random_matrix(rng, 4, 5);
  const std::vector<int> y{0, 2, 1, 2};
  Matrix xx(8, 5);
  xx << x, x;
  const std::vector<int> yy{0, 2, 1, 2, 0, 2, 1, 2};
  const auto s = random_prototype(rng, 3);
  const auto labels = unify_confidence(s, 0.7);
  const auto a = loss_and_grad(model, x, y, labels, s, std::nullopt);
  const auto b = loss_and_grad(model, xx, yy, labels, s, std::nullopt);
  CHECK(std::abs(a.loss.total - b.loss.total) < 1e-12);
  for (std::size_t k = 0; k < a.grads.size(); ++k) {
    CHECK((a.grads[k].weight - b.grads[k].weight).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.grads[k].bias - b.grads[k].bias).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Adam") {
  auto model = MlpClassifier::initialized({3, 4, 2}, 12);
  const auto before = model;
  ModelGradients zero;
  for (const auto& l : model.layers()) {
    zero.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  SUBCASE("a zero gradient without weight decay leaves parameters unchanged") {
    AdamOptimizer opt(model, {1e-2, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) opt.step(model, zero);
    for (std::size_t k = 0; k < model.layers().size(); ++k) {
      CHECK(bitwise_equal(model.layers()[k].weight, before.layers()[k].weight));
    }
    CHECK(opt.steps() == 5);
  }
  SUBCASE("a zero gradient with weight decay only shrinks parameters") {
    AdamOptimizer opt(model, {1e-3, 0.9, 0.999, 1e-8, 0.1});
    opt.step(model, zero);
    for (std::size_t k = 0; k < model.layers().size(); ++k) {
      const auto& w = model.layers()[k].weight;
      const auto& w0 = before.layers()[k].weight;
      CHECK((w.cwiseAbs().array() <= w0.cwiseAbs().array()).all());
      // First bias-corrected step moves each nonzero parameter by about lr toward zero.
      CHECK(((w - w0).cwiseAbs().array() - 1e-3).abs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("the first step has magnitude lr per coordinate") {
    ModelGradients g = zero;
    g[0].weight.setConstant(-3.0);
    AdamOptimizer opt(model, {1e-2, 0.9, 0.999, 1e-8, 0.0});
    opt.step(model, g);
    const Matrix moved = model.layers()[0].weight - before.layers()[0].weight;
    CHECK((moved.array() - 1e-2).abs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("evaluation") {
  Matrix logits(6, 3);
  logits << 3, 1, 0,   // 0
      0, 2, 2,         // tie -> 1
      1, 1, 1,         // tie -> 0
      0, 0, 5,         // 2
      4, 0, 1,         // 0
      0, 9, 1;         // 1
  const std::vector<int> truth{0, 1, 2, 2, 1, 1};
  CHECK(predict(logits) == std::vector<int>{0, 1, 0, 2, 0, 1});
  const auto e = evaluate_logits(logits, truth, 3);
  CHECK(e.accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  const std::vector<std::size_t> expected{1, 0, 0,  //
                                          1, 2, 0,  //
                                          1, 0, 1};
  CHECK(e.confusion.counts == expected);
  CHECK(e.confusion.total() == 6);
  CHECK(e.confusion.correct() == 4);

  SUBCASE("constant prediction on a balanced split scores 1/C") {
    Matrix constant = Matrix::Zero(8, 4);
    constant.col(0).setOnes();
    CHECK(evaluate_logits(constant, std::vector<int>{0, 1, 2, 3, 0, 1, 2, 3}, 4).accuracy == 0.25);
  }
  SUBCASE("errors") {
    CHECK(code_of([] { evaluate_logits(Matrix(0, 2), std::vector<int>{}, 2); }) ==
          ErrorCode::EmptyDataset);
    CHECK(code_of([&] { evaluate_logits(logits, std::vector<int>{0, 1, 2, 3, 0, 0}, 3); }) ==
          ErrorCode::OutOfRange);
  }
}

TEST_CASE("embeddings") {
  std::mt19937_64 rng(7);
  const auto model = MlpClassifier::initialized({5, 4, 3}, 13);
  FeatureSet split{random_matrix(rng, 6, 5), {0, 1, 2, 0, 1, 2}};
  const auto e = export_embeddings(model, split);
  CHECK(e.values.rows() == 6);
  CHECK(e.values.cols() == 4);
  CHECK(e.labels == split.labels);
  CHECK(bitwise_equal(e.values, export_embeddings(model, split).values));
  Matrix hidden = split.features * model.layers()[0].weight;
  hidden.rowwise() += model.layers()[0].bias.transpose();
  CHECK((e.values - hidden.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(code_of([&] { export_embeddings(MlpClassifier({5, 3}), split); }) ==
        ErrorCode::UnsupportedModel);
}

TEST_CASE("checkpoint round trip is bitwise") {
  testing::TempDir dir("ckpt");
  const auto model = MlpClassifier::initialized({7, 5, 4, 3}, 14);
  model.save(dir / "m.ckpt");
  const auto back = MlpClassifier::load(dir / "m.ckpt");
  CHECK(back.dims() == model.dims());
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    CHECK(bitwise_equal(back.layers()[k].weight, model.layers()[k].weight));
    CHECK(bitwise_equal(Matrix(back.layers()[k].bias.transpose()),
                        Matrix(model.layers()[k].bias.transpose())));
  }
  testing::spit(dir / "bad.ckpt", testing::slurp(dir / "m.ckpt").substr(0, 100));
  CHECK(code_of([&] { MlpClassifier::load(dir / "bad.ckpt"); }) == ErrorCode::Ingestion);
  CHECK(code_of([&] { MlpClassifier::load(dir / "missing.ckpt"); }) == ErrorCode::Ingestion);
}

TEST_CASE("training") {
  const auto data = toy_data(15);
  TrainConfig cfg;
  cfg.hidden = {8};
  cfg.learning_rate = 1e-2;

  SUBCASE("zero epochs reports the untrained model") {
    auto model = MlpClassifier::initialized({3, 8, 2}, 1);
    const double before = evaluate(model, data.test).accuracy;
    cfg.epochs = 0;
    const auto r = train(model, data, cfg);
    CHECK(r.epochs.empty());
    CHECK(r.test_accuracy == before);
  }
  SUBCASE("a linearly separable toy set is learned perfectly") {
    // The generating hyperplane x0 = 0 separates the test split.
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      CHECK((data.test.features(static_cast<Eigen::Index>(i), 0) > 0) == (data.test.labels[i] == 1));
    }
    auto model = MlpClassifier::initialized({3, 8, 2}, 1);
    const auto r = train(model, data, cfg);
    CHECK(r.epochs.size() == 30);
    CHECK(r.test_accuracy == 1.0);
  }
  SUBCASE("identical seeds give identical reports and parameters") {
    cfg.strategy = GlsStrategy{};
    cfg.bcl = BclConfig{};
    auto a = MlpClassifier::initialized({3, 8, 2}, 2);
    auto b = MlpClassifier::initialized({3, 8, 2}, 2);
    const auto ra = train(a, data, cfg);
    const auto rb = train(b, data, cfg);
    CHECK(same_reports(ra, rb));
    CHECK(bitwise_equal(a.layers()[0].weight, b.layers()[0].weight));
  }
  SUBCASE("hard labels record sigma 1 every epoch") {
    auto model = MlpClassifier::initialized({3, 8, 2}, 3);
    cfg.epochs = 5;
    for (const auto& e : train(model, data, cfg).epochs) {
      CHECK(e.sigma == 1.0);
      CHECK(e.hard);
    }
  }
  SUBCASE("GLS follows the schedule and turns hard after STEP + 1 epochs") {
    auto model = MlpClassifier::initialized({3, 8, 2}, 4);
    cfg.strategy = GlsStrategy{20, 0.99};
    const auto r = train(model, data, cfg);
    // Row-normalized prototype [[1, .3], [.3, 1]] has target confidence 1 / 1.3.
    const double sigma0 = 1.0 / 1.3;
    for (const auto& e : r.epochs) {
      CAPTURE(e.epoch);
      CHECK(std::abs(e.sigma - (sigma0 + (0.99 - sigma0) * (e.epoch - 1) / 20.0)) < 1e-12);
      CHECK(e.hard == (e.epoch >= 22));
    }
  }
  SUBCASE("the recorded loss is the loss of the batches actually stepped") {
    auto model = MlpClassifier::initialized({3, 8, 2}, 5);
    cfg.epochs = 1;
    cfg.batch_size = static_cast<int>(data.train.size());
    cfg.bcl = BclConfig{};
    const auto expected =
        loss_and_grad(model, data.train.features, data.train.labels, hard_labels(2), data.prototype, cfg.bcl);
    cfg.shuffle = false;
    const auto r = train(model, data, cfg);
    CHECK(r.epochs[0].loss == expected.loss.total);
    CHECK(r.epochs[0].cross_entropy == expected.loss.cross_entropy);
    CHECK(r.epochs[0].inter == expected.loss.inter);
  }
  SUBCASE("hard labels without BCL reduce to a plain softmax classifier") {
    auto model = MlpClassifier::initialized({3, 2}, 6);
    auto manual = model;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.shuffle = false;
    cfg.weight_decay = 0.0;
    train(model, data, cfg);

    AdamOptimizer opt(manual, {cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0});
    const auto n = static_cast<Eigen::Index>(data.train.size());
    for (int epoch = 0; epoch < 3; ++epoch) {
      for (Eigen::Index begin = 0; begin < n; begin += 16) {
        const auto size = std::min<Eigen::Index>(16, n - begin);
        const Matrix x = data.train.features.middleRows(begin, size);
        Matrix delta = manual.forward(x);
        for (Eigen::Index i = 0; i < size; ++i) {
          delta.row(i) = (delta.row(i).array() - delta.row(i).maxCoeff()).exp();
          delta.row(i) /= delta.row(i).sum();
          delta(i, data.train.labels[static_cast<std::size_t>(begin + i)]) -= 1.0;
        }
        delta /= static_cast<double>(size);
        ModelGradients g{{x.transpose() * delta, delta.colwise().sum().transpose()}};
        opt.step(manual, g);
      }
    }
    CHECK((model.layers()[0].weight - manual.layers()[0].weight).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("errors") {
    auto model = MlpClassifier::initialized({3, 8, 2}, 7);
    TrainData empty = data;
    empty.train = FeatureSet{Matrix(0, 3), {}};
    CHECK(code_of([&] { train(model, empty, cfg); }) == ErrorCode::EmptyDataset);
    TrainData no_proto = data;
    no_proto.prototype = Matrix();
    cfg.strategy = GlsStrategy{};
    CHECK(code_of([&] { train(model, no_proto, cfg); }) == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("gradient check harness") {
  GradCheckOptions opt;
  opt.trials = 8;
  opt.seed = 3;
  const auto a = gradient_check(opt);
  CHECK(a.cases.size() >= 20);
  CHECK(a.worst_ce_only < 1e-6);
  CHECK(a.worst_composite < 1e-4);
  const auto b = gradient_check(opt);
  REQUIRE(a.cases.size() == b.cases.size());
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    CHECK(a.cases[i].max_rel_error == b.cases[i].max_rel_error);
  }
  CHECK(relative_error(1.0, 1.0, 1.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0, 0.0) == doctest::Approx(1e-3));
  CHECK(relative_error(2.0, 1.0, 4.0) == 0.25);
}
