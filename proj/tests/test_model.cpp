#include "brakesense/error.hpp"
#include "brakesense/io.hpp"
#include "brakesense/model.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <filesystem>

using namespace brakesense;

namespace {

// Class 1 carries extra variance on channel 0.
void toy_windows(std::mt19937_64& rng, int n, std::vector<SampleMatrix>& xs, std::vector<int>& ys) {
  for (int i = 0; i < n; ++i) {
    SampleMatrix x = testing::random_matrix(rng, 6, 64);
    if (i % 2) x.row(0) *= 3.0;
    xs.push_back(x);
    ys.push_back(i % 2);
  }
}

ClassifierConfig config_for(ClassifierKind kind) {
  ClassifierConfig c;
  c.kind = kind;
  c.csp_pairs = 2;
  c.cnn.kernel_length = 16;
  c.cnn.epochs = 5;
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("classifier names") {
  for (auto k : {ClassifierKind::CspLda, ClassifierKind::Rmdm, ClassifierKind::Cnn})
    CHECK(parse_classifier_kind(to_string(k)) == k);
  CHECK_FALSE(parse_classifier_kind("svm").has_value());
}

TEST_CASE("fitted models separate the toy classes and survive serialization") {
  std::mt19937_64 rng(51);
  std::vector<SampleMatrix> xs, test_x;
  std::vector<int> ys, test_y;
  toy_windows(rng, 60, xs, ys);
  toy_windows(rng, 40, test_x, test_y);
  for (auto kind : {ClassifierKind::CspLda, ClassifierKind::Rmdm, ClassifierKind::Cnn}) {
    INFO(to_string(kind));
    const auto model = fit_model(config_for(kind), xs, ys, RngSeed{2});
    CHECK(kind_of(model) == kind);
    int correct = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) correct += predict(model, test_x[i]).label == test_y[i];
    if (kind != ClassifierKind::Cnn) CHECK(correct >= 34);

    const auto bytes = encode_model(model);
    const auto back = decode_model(bytes);
    CHECK(kind_of(back) == kind);
    CHECK(encode_model(back) == bytes);
    for (std::size_t i = 0; i < test_x.size(); ++i) CHECK(predict(back, test_x[i]).label == predict(model, test_x[i]).label);

    auto bad = bytes;
    bad.pop_back();
    CHECK_THROWS_AS(decode_model(bad), FormatError);
    bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_model(bad), FormatError);
  }
}

TEST_CASE("model files") {
  std::mt19937_64 rng(52);
  std::vector<SampleMatrix> xs;
  std::vector<int> ys;
  toy_windows(rng, 20, xs, ys);
  const auto model = fit_model(config_for(ClassifierKind::Rmdm), xs, ys, RngSeed{1});
  const auto dir = std::filesystem::temp_directory_path() / "brakesense_model_test";
  std::filesystem::create_directories(dir);
  write_model(model, dir / "m.mdl");
  CHECK(encode_model(read_model(dir / "m.mdl")) == encode_model(model));
  std::filesystem::remove_all(dir);
}

TEST_CASE("RMDM convergence bookkeeping") {
  std::mt19937_64 rng(53);
  std::vector<SampleMatrix> xs;
  std::vector<int> ys;
  toy_windows(rng, 30, xs, ys);
  auto cfg = config_for(ClassifierKind::Rmdm);
  const auto ok = std::get<RmdmModel>(fit_model(cfg, xs, ys, RngSeed{1}));
  CHECK(ok.converged);
  cfg.mean_max_iter = 1;
  cfg.mean_tolerance = 1e-15;
  const auto loose = std::get<RmdmModel>(fit_model(cfg, xs, ys, RngSeed{1}));
  CHECK_FALSE(loose.converged);
  cfg.strict = true;
  CHECK_THROWS_AS(fit_model(cfg, xs, ys, RngSeed{1}), NumericalError);
}

TEST_CASE("training set validation") {
  std::mt19937_64 rng(54);
  std::vector<SampleMatrix> xs;
  std::vector<int> ys;
  toy_windows(rng, 3, xs, ys);
  CHECK_THROWS_AS(fit_model(config_for(ClassifierKind::Rmdm), xs, ys, RngSeed{1}), DataError);
  ys[0] = 2;
  CHECK_THROWS_AS(fit_model(config_for(ClassifierKind::CspLda), xs, ys, RngSeed{1}), DataError);
  auto cfg = config_for(ClassifierKind::CspLda);
  cfg.shrinkage = 2;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

}  // TEST_SUITE
