#include "brakesense/epoching.hpp"
#include "brakesense/error.hpp"
#include "brakesense/fir.hpp"
#include "brakesense/pipeline.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>

using namespace brakesense;

namespace {

constexpr double kPi = std::numbers::pi;

double dft_gain(const std::vector<double>& h, double f, double fs) {
  double re = 0, im = 0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    re += h[k] * std::cos(2 * kPi * f * static_cast<double>(k) / fs);
    im -= h[k] * std::sin(2 * kPi * f * static_cast<double>(k) / fs);
  }
  return std::hypot(re, im);
}

// Direct-form zero-phase oracle with mirror extension x[-i] = x[i].
std::vector<double> direct_filter(const std::vector<double>& x, const std::vector<double>& h) {
  const auto L = static_cast<long>(x.size());
  const long d = (static_cast<long>(h.size()) - 1) / 2;
  const auto ext = [&](long i) {
    if (i < 0) return x[static_cast<std::size_t>(-i)];
    if (i >= L) return x[static_cast<std::size_t>(2 * (L - 1) - i)];
    return x[static_cast<std::size_t>(i)];
  };
  std::vector<double> y(x.size());
  for (long n = 0; n < L; ++n) {
    double acc = 0;
    for (long k = 0; k < static_cast<long>(h.size()); ++k) acc += h[static_cast<std::size_t>(k)] * ext(n + d - k);
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

SampleMatrix one_channel(const std::vector<double>& x) {
  SampleMatrix m(2, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = m(1, static_cast<Eigen::Index>(i)) = x[i];
  return m;
}

// Amplitude and phase of the f-Hz component of y[lo, hi) by least squares on sin/cos.
std::pair<double, double> fit_sine(const SampleMatrix& y, double f, double fs, Eigen::Index lo, Eigen::Index hi) {
  Eigen::MatrixXd a(hi - lo, 2);
  Eigen::VectorXd b(hi - lo);
  for (Eigen::Index n = lo; n < hi; ++n) {
    a(n - lo, 0) = std::sin(2 * kPi * f * n / fs);
    a(n - lo, 1) = std::cos(2 * kPi * f * n / fs);
    b(n - lo) = y(0, n);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  return {std::hypot(c(0), c(1)), std::atan2(c(1), c(0))};
}

std::vector<double> sine(std::size_t n, double f, double fs) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * kPi * f * static_cast<double>(i) / fs);
  return x;
}

// Channel 0 holds the sample index so the origin of every epoch can be read back.
ContinuousRecording ramp_recording(std::size_t samples, std::vector<Event> events) {
  ContinuousRecording rec;
  rec.subject = "S01";
  rec.samples = SampleMatrix::Zero(28, static_cast<Eigen::Index>(samples));
  for (std::size_t i = 0; i < samples; ++i) rec.samples(0, static_cast<Eigen::Index>(i)) = static_cast<double>(i);
  rec.events = std::move(events);
  return rec;
}

EpochSet constant_epochs(std::initializer_list<double> peaks) {
  EpochSet set;
  for (double p : peaks) {
    Epoch e;
    e.samples = SampleMatrix::Zero(28, 800);
    e.samples(5, 400) = p;
    set.epochs.push_back(e);
  }
  return set;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("band-pass design is linear phase") {
  const auto f = design_bandpass(1, 45, 200, 401);
  REQUIRE(f.coefficients.size() == 401);
  CHECK(f.group_delay() == 200);
  for (std::size_t k = 0; k < 401; ++k) CHECK(f.coefficients[k] == f.coefficients[400 - k]);
}

TEST_CASE("band-pass magnitude response") {
  const auto f = design_bandpass(1, 45, 200, 401);
  const auto& h = f.coefficients;
  const double g20 = dft_gain(h, 20, 200);
  CHECK(std::abs(g20 - 1.0) < 0.05);
  CHECK(dft_gain(h, 0, 200) / g20 <= 1e-2);
  CHECK(dft_gain(h, 60, 200) <= 0.1);
  CHECK(dft_gain(h, 99, 200) <= 0.1);
  for (double fr : {3.0, 10.0, 30.0, 40.0}) CHECK(std::abs(dft_gain(h, fr, 200) - 1.0) < 0.05);
  CHECK(std::abs(std::abs(frequency_response(f, 20)) - g20) < 1e-12);
}

TEST_CASE("invalid designs are usage errors") {
  CHECK_THROWS_AS(design_bandpass(45, 1, 200, 401), UsageError);
  CHECK_THROWS_AS(design_bandpass(1, 100, 200, 401), UsageError);
  CHECK_THROWS_AS(design_bandpass(0, 45, 200, 401), UsageError);
  CHECK_THROWS_AS(design_bandpass(1, 45, 200, 400), UsageError);
}

TEST_CASE("zero-phase filtering matches direct convolution") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {401u, 1000u, 9000u}) {
    std::vector<double> x(n);
    std::normal_distribution<double> g(0, 10);
    for (auto& v : x) v = g(rng);
    for (int taps : {401, 41}) {
      const auto f = design_bandpass(1, 45, 200, taps);
      const auto oracle = direct_filter(x, f.coefficients);
      const auto y = filter_zero_phase(one_channel(x), f);
      double err = 0;
      for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(y(0, static_cast<Eigen::Index>(i)) - oracle[i]));
      CHECK(err < 1e-9);
      CHECK(y.row(1) == y.row(0));
    }
  }
}

TEST_CASE("20 Hz passes with unit gain and zero phase") {
  const auto f = design_bandpass(1, 45, 200, 401);
  const auto x = sine(4000, 20, 200);
  const auto y = filter_zero_phase(one_channel(x), f);
  const auto [amp, phase] = fit_sine(y, 20, 200, 400, 3600);
  CHECK(std::abs(amp - 1.0) < 0.05);
  CHECK(std::abs(phase) < 1e-6);
}

TEST_CASE("DC is rejected and 60 Hz attenuated") {
  const auto f = design_bandpass(1, 45, 200, 401);
  const auto dc = filter_zero_phase(one_channel(std::vector<double>(4000, 10.0)), f);
  CHECK(dc.row(0).cwiseAbs().maxCoeff() < 0.1);

  const auto x = sine(4000, 60, 200);
  const auto y = filter_zero_phase(one_channel(x), f);
  const auto [amp, phase] = fit_sine(y, 60, 200, 400, 3600);
  (void)phase;
  CHECK(amp <= 0.1);
}

TEST_CASE("filter rejects short input and mismatched rates") {
  const auto f = design_bandpass(1, 45, 200, 401);
  CHECK_THROWS_AS(filter_zero_phase(SampleMatrix::Zero(2, 400), f), DataError);
  ContinuousRecording rec;
  rec.sample_rate = 250;
  rec.samples = SampleMatrix::Zero(28, 1000);
  CHECK_THROWS_AS(apply_filter(rec, f), UsageError);
}

TEST_CASE("brake epochs cover [press - 3000, press + 1000)") {
  // 60 s recording; presses at 10 s, 1 s (too early) and 59.5 s (too late).
  const auto rec = ramp_recording(12000, {{1000.0, BrakePedalPress{ClassLabel::Normal}},
                                          {10000.0, BrakePedalPress{ClassLabel::Emergency}},
                                          {10000.0 + 1.0, BrakeLightOn{}},
                                          {59500.0, BrakePedalPress{ClassLabel::Emergency}}});
  const auto out = extract_brake_epochs(rec, EpochWindowSpec{});
  CHECK(out.skipped == 2);
  REQUIRE(out.set.epochs.size() == 1);
  const auto& e = out.set.epochs[0];
  CHECK(e.label == ClassLabel::Emergency);
  CHECK(e.t0_offset_ms == 3000);
  CHECK(e.samples.cols() == 800);
  CHECK(e.samples(0, 0) == 1400.0);    // 7000 ms
  CHECK(e.samples(0, 799) == 2199.0);  // last sample before 11000 ms
}

TEST_CASE("one epoch per press") {
  std::vector<Event> events;
  for (int i = 0; i < 189; ++i) events.push_back({5000.0 + 6000.0 * i, BrakePedalPress{ClassLabel::Emergency}});
  const auto rec = ramp_recording(static_cast<std::size_t>(200 * (5 + 6 * 189)), events);
  const auto out = extract_brake_epochs(rec, EpochWindowSpec{});
  CHECK(out.set.epochs.size() == 189);
  CHECK(out.skipped == 0);
}

TEST_CASE("no-braking windows keep their distance from every event") {
  std::vector<Event> events;
  for (double t : {20000.0, 20600.0, 95000.0, 300000.0, 301000.0, 900000.0, 1500000.0})
    events.push_back({t, BrakeLightOn{}});
  const auto rec = ramp_recording(200 * 1800, events);
  const EpochWindowSpec spec;

  // Brute-force count of admissible start samples.
  std::size_t admissible = 0;
  for (std::int64_t s = 0; s + 800 <= 200 * 1800; ++s) {
    const double start = 5.0 * static_cast<double>(s), end = start + 4000.0;
    bool ok = true;
    for (const auto& e : events) ok = ok && (e.time_ms <= start - 3000.0 || e.time_ms >= end + 3000.0);
    admissible += ok;
  }
  CHECK(count_no_brake_positions(rec, spec) == admissible);

  const auto set = extract_no_brake_epochs(rec, spec, 200, RngSeed{3});
  REQUIRE(set.epochs.size() == 200);
  std::set<double> starts;
  for (const auto& e : set.epochs) {
    CHECK(e.label == ClassLabel::NoBraking);
    CHECK(e.samples.cols() == 800);
    const double start = 5.0 * e.samples(0, 0), end = start + 4000.0;
    for (const auto& ev : events) CHECK((ev.time_ms <= start - 3000.0 || ev.time_ms >= end + 3000.0));
    starts.insert(start);
  }
  CHECK(starts.size() == 200);

  const auto again = extract_no_brake_epochs(rec, spec, 200, RngSeed{3});
  CHECK(again == set);
  const auto other = extract_no_brake_epochs(rec, spec, 200, RngSeed{4});
  CHECK_FALSE(other == set);
}

TEST_CASE("no-braking deficit is a data error") {
  std::vector<Event> events;
  for (double t = 1000.0; t < 600000.0; t += 5000.0) events.push_back({t, BrakeLightOn{}});
  const auto rec = ramp_recording(200 * 600, events);
  CHECK(count_no_brake_positions(rec, EpochWindowSpec{}) == 0);
  try {
    extract_no_brake_epochs(rec, EpochWindowSpec{}, 200, RngSeed{1});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("deficit 200") != std::string::npos);
  }
}

TEST_CASE("artifact rejection is strict at the threshold") {
  const auto set = constant_epochs({301.0, 300.0, -301.0, -300.0, 0.0});
  const auto r = reject_artifacts(set, 300.0);
  CHECK(r.rejected == 2);
  REQUIRE(r.kept.epochs.size() == 3);
  CHECK(r.kept.epochs[0].samples(5, 400) == 300.0);
  CHECK(r.kept.epochs[1].samples(5, 400) == -300.0);

  const auto all = reject_artifacts(set, std::numeric_limits<double>::infinity());
  CHECK(all.rejected == 0);
  CHECK(all.kept == set);
  CHECK_THROWS_AS(reject_artifacts(set, 0.0), UsageError);
}

TEST_CASE("baseline correction") {
  std::mt19937_64 rng(21);
  EpochSet set;
  Epoch e;
  e.samples = testing::float_samples(rng, 28, 800, 15.0);
  set.epochs.push_back(e);
  e.samples = SampleMatrix::Constant(28, 800, 42.0);
  set.epochs.push_back(e);

  const auto out = baseline_correct(set, 500.0);
  for (Eigen::Index c = 0; c < 28; ++c) {
    const double mean = set.epochs[0].samples.row(c).head(100).mean();
    for (Eigen::Index t = 0; t < 800; t += 97)
      CHECK(std::abs(out.epochs[0].samples(c, t) - (set.epochs[0].samples(c, t) - mean)) < 1e-9);
    CHECK(std::abs(out.epochs[0].samples.row(c).head(100).mean()) < 1e-9);
  }
  CHECK(out.epochs[1].samples.cwiseAbs().maxCoeff() == 0.0);

  const auto twice = baseline_correct(out, 500.0);
  double diff = 0;
  for (std::size_t i = 0; i < 2; ++i)
    diff = std::max(diff, (twice.epochs[i].samples - out.epochs[i].samples).cwiseAbs().maxCoeff());
  CHECK(diff <= 1e-12);

  EpochSet zero_base;
  Epoch z;
  z.samples = SampleMatrix::Constant(28, 800, 10.0);
  z.samples.leftCols(100).setZero();
  zero_base.epochs.push_back(z);
  CHECK(baseline_correct(zero_base, 500.0) == zero_base);
  CHECK_THROWS_AS(baseline_correct(zero_base, 5000.0), UsageError);
}

TEST_CASE("preprocess_recordings splits the no-braking quota and records rejections") {
  SimulationConfig sim;
  sim.scenario.session_minutes = 12.0;
  PreprocessConfig pre;
  pre.no_brake_count = 41;
  std::vector<ContinuousRecording> recs{simulate_recording(sim, DrivingMode::Emergency, 0, RngSeed{9}),
                                        simulate_recording(sim, DrivingMode::Normal, 0, RngSeed{9})};
  std::size_t presses = 0;
  for (const auto& r : recs)
    for (const auto& e : r.events) presses += std::holds_alternative<BrakePedalPress>(e.kind);
  const auto out = preprocess_recordings(recs, pre, RngSeed{5});
  CHECK(out.report.total == presses - out.report.skipped + 41);
  const auto counts = out.set.class_counts();
  CHECK(counts[0] + counts[1] + counts[2] + out.report.rejected == out.report.total);
  CHECK(out.report.kept_per_class == counts);
  for (const auto& e : out.set.epochs) CHECK(e.samples.leftCols(100).rowwise().mean().cwiseAbs().maxCoeff() < 1e-9);

  const auto again = preprocess_recordings(recs, pre, RngSeed{5});
  CHECK(again.set == out.set);

  std::vector<ContinuousRecording> mixed{recs[0], simulate_recording(sim, DrivingMode::Normal, 1, RngSeed{9})};
  CHECK_THROWS_AS(preprocess_recordings(mixed, pre, RngSeed{5}), DataError);
}

}  // TEST_SUITE
