#include "brakesense/error.hpp"
#include "brakesense/eval.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace brakesense;

namespace {

const ChannelMontage& small_montage() {
  static const ChannelMontage m({"A", "B", "C", "D"}, {{0, 0.5}, {0.5, 0}, {0, -0.5}, {-0.5, 0}});
  return m;
}

// Label-only epochs; channel 0 sample 0 stores the epoch's creation index.
EpochSet labelled(std::size_t emergency, std::size_t normal, std::size_t none) {
  EpochSet set;
  set.montage = small_montage();
  std::size_t id = 0;
  const auto add = [&](ClassLabel l, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      Epoch e;
      e.label = l;
      e.samples = SampleMatrix::Zero(4, 8);
      e.samples(0, 0) = static_cast<double>(id++);
      set.epochs.push_back(e);
    }
  };
  add(ClassLabel::Emergency, emergency);
  add(ClassLabel::Normal, normal);
  add(ClassLabel::NoBraking, none);
  return set;
}

// Emergency epochs carry extra variance on channel 0 inside [-400, 0) ms.
EpochSet separable(std::size_t per_class, double gain, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EpochSet set;
  set.montage = small_montage();
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    Epoch e;
    e.label = i % 2 ? ClassLabel::NoBraking : ClassLabel::Emergency;
    e.samples = testing::float_samples(rng, 4, 800, 5.0);
    if (e.label == ClassLabel::Emergency) e.samples.block(0, 520, 1, 80) *= gain;
    set.epochs.push_back(e);
  }
  set.provenance = "S01";
  return set;
}

EvalProtocol quick_protocol() {
  EvalProtocol p;
  p.repetitions = 3;
  p.seed = RngSeed{17};
  return p;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("accuracy") {
  std::vector<ClassLabel> labels(100, ClassLabel::Emergency), preds = labels;
  for (int i = 0; i < 6; ++i) preds[static_cast<std::size_t>(i)] = ClassLabel::NoBraking;
  CHECK(accuracy(preds, labels) == 0.94);
  CHECK(accuracy(labels, labels) == 1.0);
  CHECK_THROWS_AS(accuracy(std::vector<ClassLabel>{}, std::vector<ClassLabel>{}), DataError);
  CHECK_THROWS_AS(accuracy(preds, std::vector<ClassLabel>(3)), DataError);

  // Random guessing on a balanced set stays at one half.
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.5);
  std::vector<ClassLabel> truth(10000), guess(10000);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = i % 2 ? ClassLabel::Emergency : ClassLabel::NoBraking;
    guess[i] = coin(rng) ? ClassLabel::Emergency : ClassLabel::NoBraking;
  }
  CHECK(std::abs(accuracy(guess, truth) - 0.5) < 0.02);
}

TEST_CASE("class pair names") {
  for (auto p : {ClassPair::EmergencyVsNone, ClassPair::NormalVsNone, ClassPair::EmergencyVsNormal})
    CHECK(parse_class_pair(to_string(p)) == p);
  CHECK(to_string(ClassPair::EmergencyVsNone) == "emergency-vs-none");
  CHECK(classes_of(ClassPair::EmergencyVsNormal) == std::array{ClassLabel::Emergency, ClassLabel::Normal});
}

TEST_CASE("balancing") {
  const auto set = labelled(189, 114, 200);
  const auto b = balance_classes(set, classes_of(ClassPair::EmergencyVsNone), RngSeed{3});
  CHECK(b.class_counts() == std::array<std::size_t, 3>{189, 0, 189});
  // Every emergency epoch survives; survivors keep their order.
  double prev = -1;
  for (const auto& e : b.epochs) {
    CHECK(e.samples(0, 0) > prev);
    prev = e.samples(0, 0);
  }
  CHECK(balance_classes(set, classes_of(ClassPair::EmergencyVsNone), RngSeed{3}) == b);
  CHECK_FALSE(balance_classes(set, classes_of(ClassPair::EmergencyVsNone), RngSeed{4}) == b);

  const auto even = labelled(0, 114, 114);
  CHECK(balance_classes(even, classes_of(ClassPair::NormalVsNone), RngSeed{1}).class_counts() ==
        std::array<std::size_t, 3>{0, 114, 114});
  CHECK_THROWS_AS(balance_classes(even, classes_of(ClassPair::EmergencyVsNone), RngSeed{1}), DataError);
}

TEST_CASE("stratified split") {
  const auto s = split_half(labelled(100, 0, 100), 0.5, RngSeed{5});
  CHECK(s.train.class_counts() == std::array<std::size_t, 3>{50, 0, 50});
  CHECK(s.test.class_counts() == std::array<std::size_t, 3>{50, 0, 50});

  const auto odd = split_half(labelled(3, 0, 3), 0.5, RngSeed{5});
  CHECK(odd.train.class_counts() == std::array<std::size_t, 3>{2, 0, 2});
  CHECK(odd.test.class_counts() == std::array<std::size_t, 3>{1, 0, 1});
  CHECK_THROWS_AS(split_half(labelled(1, 0, 3), 0.5, RngSeed{5}), DataError);
}

TEST_CASE("split is a partition on random sets") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> size(2, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto set = labelled(size(rng), 0, size(rng));
    const auto s = split_half(set, 0.5, RngSeed{static_cast<std::uint64_t>(trial)});
    std::set<std::size_t> train(s.train_indices.begin(), s.train_indices.end());
    std::set<std::size_t> test(s.test_indices.begin(), s.test_indices.end());
    CHECK(train.size() == s.train_indices.size());
    std::vector<std::size_t> both;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(both));
    CHECK(both.empty());
    CHECK(train.size() + test.size() == set.epochs.size());
    for (std::size_t k = 0; k < s.train_indices.size(); ++k)
      CHECK(s.train.epochs[k].samples(0, 0) == static_cast<double>(s.train_indices[k]));
  }
}

TEST_CASE("window grid") {
  const EvalProtocol p;
  const auto ends = p.window_ends();
  REQUIRE(ends.size() == 61);
  CHECK(ends.front() == -2000);
  CHECK(ends.back() == 1000);
  CHECK(std::find(ends.begin(), ends.end(), 0.0) != ends.end());
  EvalProtocol bad;
  bad.test_window_len_ms = 500;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.first_window_end_ms = -2500;  // window would start before the epoch
  auto set = labelled(4, 0, 4);
  for (auto& e : set.epochs) e.samples = SampleMatrix::Zero(4, 800);
  CHECK_THROWS_AS(bad.check_fits(set), UsageError);
  CHECK_NOTHROW(EvalProtocol{}.check_fits(set));
}

TEST_CASE("protocol recovers a time-locked effect and never trains on test epochs") {
  const auto set = separable(40, 4.0, 7);
  std::vector<std::vector<std::size_t>> seen;
  const auto run = run_protocol(set, ClassPair::EmergencyVsNone, quick_protocol(),
                                [&](std::span<const std::size_t> ids) { seen.emplace_back(ids.begin(), ids.end()); });
  REQUIRE(seen.size() == 3);
  for (const auto& ids : seen) CHECK(ids.size() == 40);
  CHECK(run.test_epochs == 40);
  CHECK(run.repetition_accuracy.size() == 3);
  REQUIRE(run.curve.points.size() == 61);

  const auto at = [&](double t) {
    for (const auto& p : run.curve.points)
      if (p.window_end_ms == t) return p;
    FAIL("missing window end");
    return CurvePoint{};
  };
  CHECK(at(0).mean > 0.9);
  CHECK(at(0).n == 3);
  CHECK(at(-1500).mean < 0.75);
  CHECK(run.counts_after == std::array<std::size_t, 3>{40, 0, 40});

  // The observed ids are training ids of the repetition's split.
  const auto rep0 = split_half(balance_classes(set, classes_of(ClassPair::EmergencyVsNone),
                                               split_rng(quick_protocol().seed, 0)),
                               0.5, split_rng(split_rng(quick_protocol().seed, 1), 0));
  CHECK(seen[0] == rep0.train_indices);

  const auto again = run_protocol(set, ClassPair::EmergencyVsNone, quick_protocol());
  CHECK(curve_csv(again.curve) == curve_csv(run.curve));
}

TEST_CASE("subject runs are independent of the thread count") {
  const std::vector<EpochSet> sets{separable(20, 3.0, 1), separable(20, 3.0, 2), separable(20, 3.0, 3)};
  const auto one = aggregate(run_subjects(sets, ClassPair::EmergencyVsNone, quick_protocol(), 1));
  const auto three = aggregate(run_subjects(sets, ClassPair::EmergencyVsNone, quick_protocol(), 3));
  CHECK(curve_csv(one) == curve_csv(three));
  CHECK(one.points.front().n == 3);
}

TEST_CASE("aggregate statistics") {
  SubjectRun a, b;
  a.curve.points = {{0, 0.9, 0, 10}, {50, 0.5, 0, 10}};
  b.curve.points = {{0, 0.7, 0, 10}, {50, 0.5, 0, 10}};
  const std::vector<SubjectRun> runs{a, b};
  const auto c = aggregate(runs);
  CHECK(c.points[0].mean == doctest::Approx(0.8));
  CHECK(c.points[0].std == doctest::Approx(std::sqrt(0.02)));
  CHECK(c.points[0].n == 2);
  CHECK(c.points[1].std == 0.0);
}

TEST_CASE("prediction time") {
  const auto curve = [](std::vector<std::pair<double, double>> pts) {
    AccuracyCurve c;
    for (auto [t, m] : pts) c.points.push_back({t, m, 0, 1});
    return c;
  };
  // Staircase rising to 1 at -300 ms.
  CHECK(prediction_time(curve({{-500, 0.6}, {-400, 0.7}, {-300, 0.8}, {-200, 0.9}, {-100, 1.0}, {0, 1.0}, {100, 1.0}}),
                        0.75) == -300.0);
  CHECK_FALSE(prediction_time(curve({{-100, 0.9}, {0, 0.6}}), 0.75).has_value());
  CHECK(prediction_time(curve({{-200, 0.9}, {-100, 0.6}, {0, 0.9}}), 0.75) == 0.0);
  CHECK(prediction_time(curve({{-100, 0.95}, {0, 0.95}}), 0.9) == -100.0);
  CHECK_THROWS_AS(prediction_time(curve({{0, 1}}), 0.4), UsageError);
}

TEST_CASE("percentiles and EBRT statistics") {
  CHECK(percentile({1, 2, 3, 4, 5}, 50) == 3);
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({10, 0}, 25) == 2.5);
  CHECK(percentile({7}, 95) == 7);
  const std::vector<Event> events{{1000, BrakeLightOn{}},
                                  {1700, BrakePedalPress{ClassLabel::Emergency}},
                                  {5000, BrakePedalPress{ClassLabel::Normal}},
                                  {9000, BrakeLightOn{}},
                                  {9900, BrakePedalPress{ClassLabel::Emergency}}};
  const auto v = ebrt_values(events);
  CHECK(v == std::vector<double>{700, 900});
  const auto s = ebrt_stats(v);
  CHECK(s.mean_ms == 800);
  CHECK(s.std_ms == doctest::Approx(std::sqrt(20000.0)));
  CHECK(s.percentiles[2] == 800);
  CHECK_THROWS_AS(ebrt_values(std::vector<Event>{{1000, BrakeLightOn{}}}), DataError);
  CHECK_THROWS_AS(ebrt_values(std::vector<Event>{{1000, BrakePedalPress{ClassLabel::Emergency}}}), DataError);
}

TEST_CASE("topomap export") {
  auto a = separable(10, 1.0, 9);
  for (auto& e : a.epochs) e.samples.setZero();
  auto b = a;
  for (auto& e : a.epochs) e.samples.row(2).setConstant(6.0);
  const std::vector<double> times{-300, 0};
  const auto topo = topomap_export(a, b, times);
  CHECK(topo.size() == 2 * 4);
  for (const auto& v : topo) CHECK(v.value_uv == (v.channel == "C" ? 6.0 : 0.0));
  CHECK(topo[1].channel == "B");
  CHECK(topo[1].x == 0.5);
  CHECK(topo[4].time_ms == 0);
  for (const auto& v : topomap_export(a, a, times)) CHECK(v.value_uv == 0.0);
  const std::vector<double> late{990};
  CHECK_THROWS_AS(topomap_export(a, b, late), UsageError);
  const auto csv = topomap_csv(topo);
  CHECK(csv.rfind("channel,x,y,time_ms,value_uv\nA,0,0.5,-300,0\n", 0) == 0);
}

TEST_CASE("curve csv") {
  AccuracyCurve c;
  c.points = {{-2000, 0.5, 0.0123456789, 11}, {0, 0.97, 0.02, 11}};
  CHECK(curve_csv(c) == "window_end_ms,mean_acc,std_acc,n\n-2000,0.5,0.0123457,11\n0,0.97,0.02,11\n");
}

}  // TEST_SUITE
