#include "brakesense/eval.hpp"

#include "brakesense/error.hpp"
#include "brakesense/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace brakesense {

std::string_view to_string(ClassPair pair) {
  switch (pair) {
    case ClassPair::EmergencyVsNone: return "emergency-vs-none";
    case ClassPair::NormalVsNone: return "normal-vs-none";
    case ClassPair::EmergencyVsNormal: return "emergency-vs-normal";
  }
  return "?";
}

std::optional<ClassPair> parse_class_pair(std::string_view text) {
  for (auto p : {ClassPair::EmergencyVsNone, ClassPair::NormalVsNone, ClassPair::EmergencyVsNormal})
    if (to_string(p) == text) return p;
  return std::nullopt;
}

std::array<ClassLabel, 2> classes_of(ClassPair pair) {
  switch (pair) {
    case ClassPair::EmergencyVsNone: return {ClassLabel::Emergency, ClassLabel::NoBraking};
    case ClassPair::NormalVsNone: return {ClassLabel::Normal, ClassLabel::NoBraking};
    case ClassPair::EmergencyVsNormal: return {ClassLabel::Emergency, ClassLabel::Normal};
  }
  return {ClassLabel::Emergency, ClassLabel::NoBraking};
}

namespace {

EpochSet empty_copy(const EpochSet& set) {
  EpochSet out;
  out.montage = set.montage;
  out.sample_rate = set.sample_rate;
  out.provenance = set.provenance;
  return out;
}

// Sorted random subset of `count` elements of `pool`.
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t count, Engine& engine) {
  std::shuffle(pool.begin(), pool.end(), engine);
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

EpochSet balance_classes(const EpochSet& set, std::array<ClassLabel, 2> classes, RngSeed seed) {
  if (classes[0] == classes[1]) throw UsageError("balancing needs two distinct classes");
  std::vector<std::size_t> members[2];
  for (std::size_t i = 0; i < set.epochs.size(); ++i)
    for (int c = 0; c < 2; ++c)
      if (set.epochs[i].label == classes[c]) members[c].push_back(i);
  for (int c = 0; c < 2; ++c)
    if (members[c].empty())
      throw DataError("class '" + std::string(to_string(classes[c])) + "' is absent from the epoch set");

  const auto target = std::min(members[0].size(), members[1].size());
  auto engine = make_engine(seed);
  std::vector<std::size_t> keep;
  for (auto& m : members) {
    if (m.size() > target) m = choose(m, target, engine);
    keep.insert(keep.end(), m.begin(), m.end());
  }
  std::sort(keep.begin(), keep.end());
  EpochSet out = empty_copy(set);
  for (auto i : keep) out.epochs.push_back(set.epochs[i]);
  return out;
}

Split split_half(const EpochSet& set, double train_fraction, RngSeed seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, 3> members;
  for (std::size_t i = 0; i < set.epochs.size(); ++i)
    members[static_cast<std::size_t>(set.epochs[i].label)].push_back(i);

  auto engine = make_engine(seed);
  Split out{empty_copy(set), empty_copy(set), {}, {}};
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto& m = members[c];
    if (m.empty()) continue;
    if (m.size() < 2)
      throw DataError("class '" + std::string(to_string(static_cast<ClassLabel>(c))) +
                      "' has fewer than 2 epochs; cannot split");
    const auto n = static_cast<double>(m.size());
    auto n_train = static_cast<std::size_t>(std::floor(n * train_fraction + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, m.size() - 1);
    const auto picked = choose(m, n_train, engine);
    std::vector<bool> is_train(set.epochs.size(), false);
    for (auto i : picked) is_train[i] = true;
    for (auto i : m) (is_train[i] ? out.train_indices : out.test_indices).push_back(i);
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  for (auto i : out.train_indices) out.train.epochs.push_back(set.epochs[i]);
  for (auto i : out.test_indices) out.test.epochs.push_back(set.epochs[i]);
  return out;
}

double accuracy(std::span<const ClassLabel> predictions, std::span<const ClassLabel> labels) {
  if (predictions.size() != labels.size()) throw DataError("predictions and labels differ in length");
  if (labels.empty()) throw DataError("accuracy of an empty prediction set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void EvalProtocol::validate() const {
  if (repetitions < 1) throw UsageError("repetitions must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
  if (!(train_window_start_ms < train_window_end_ms)) throw UsageError("train window must have positive length");
  if (!(test_window_len_ms > 0.0) || !(window_step_ms > 0.0)) throw UsageError("test window and step must be > 0");
  if (std::abs((train_window_end_ms - train_window_start_ms) - test_window_len_ms) > 1e-9)
    throw UsageError("test window length must equal the train window length");
  if (!(first_window_end_ms <= last_window_end_ms)) throw UsageError("window end range is empty");
  classifier.validate();
}

std::vector<double> EvalProtocol::window_ends() const {
  std::vector<double> ends;
  const auto steps = static_cast<long>(std::floor((last_window_end_ms - first_window_end_ms) / window_step_ms + 1e-9));
  for (long i = 0; i <= steps; ++i) ends.push_back(first_window_end_ms + static_cast<double>(i) * window_step_ms);
  return ends;
}

void EvalProtocol::check_fits(const EpochSet& set) const {
  const double rate = set.sample_rate;
  const auto total = static_cast<std::int64_t>(set.samples_per_epoch());
  const auto len = ms_to_samples(test_window_len_ms, rate);
  for (const auto& e : set.epochs) {
    const auto fits = [&](double start_ms, double end_ms) {
      const auto start = ms_to_samples(e.t0_offset_ms + start_ms, rate);
      const auto stop = ms_to_samples(e.t0_offset_ms + end_ms, rate);
      return start >= 0 && stop <= total;
    };
    if (!fits(train_window_start_ms, train_window_end_ms))
      throw UsageError("train window leaves the " + std::to_string(total) + "-sample epochs");
    if (!fits(first_window_end_ms - test_window_len_ms, first_window_end_ms) ||
        !fits(last_window_end_ms - test_window_len_ms, last_window_end_ms))
      throw UsageError("test window end range leaves the " + std::to_string(total) + "-sample epochs");
  }
  if (len < 2) throw UsageError("test window holds fewer than two samples");
}

SubjectRun run_protocol(const EpochSet& set, ClassPair pair, const EvalProtocol& protocol,
                        const FitObserver& observer) {
  protocol.validate();
  const auto classes = classes_of(pair);
  SubjectRun run;
  run.subject = set.provenance;
  run.counts_before = set.class_counts();
  const EpochSet balanced = balance_classes(set, classes, split_rng(protocol.seed, 0));
  run.counts_after = balanced.class_counts();
  protocol.check_fits(balanced);

  const double rate = balanced.sample_rate;
  const auto len = ms_to_samples(protocol.test_window_len_ms, rate);
  const auto ends = protocol.window_ends();
  const auto binary = [&](ClassLabel l) { return l == classes[0] ? 0 : 1; };

  for (int rep = 0; rep < protocol.repetitions; ++rep) {
    const auto rep_seed = split_rng(protocol.seed, 1 + static_cast<std::uint64_t>(rep));
    const Split split = split_half(balanced, protocol.train_fraction, split_rng(rep_seed, 0));

    std::vector<SampleMatrix> windows;
    std::vector<int> labels;
    for (const auto& e : split.train.epochs) {
      const auto start = ms_to_samples(e.t0_offset_ms + protocol.train_window_start_ms, rate);
      windows.emplace_back(e.samples.middleCols(start, len));
      labels.push_back(binary(e.label));
    }
    if (observer) observer(split.train_indices);
    const TrainedModel model = fit_model(protocol.classifier, windows, labels, split_rng(rep_seed, 1));
    if (const auto* r = std::get_if<RmdmModel>(&model); r && !r->converged) ++run.mean_nonconverged;

    std::vector<double> acc;
    acc.reserve(ends.size());
    for (const double end : ends) {
      std::size_t correct = 0;
      for (const auto& e : split.test.epochs) {
        const auto start = ms_to_samples(e.t0_offset_ms + end, rate) - len;
        const auto p = predict(model, e.samples.middleCols(start, len));
        run.ties += p.tie;
        correct += p.label == binary(e.label);
      }
      acc.push_back(static_cast<double>(correct) / static_cast<double>(split.test.epochs.size()));
    }
    run.test_epochs = split.test.epochs.size();
    run.repetition_accuracy.push_back(std::move(acc));
  }

  for (std::size_t w = 0; w < ends.size(); ++w) {
    std::vector<double> column;
    for (const auto& rep : run.repetition_accuracy) column.push_back(rep[w]);
    run.curve.points.push_back({ends[w], mean_of(column), sample_std(column), column.size()});
  }
  return run;
}

AccuracyCurve aggregate(std::span<const SubjectRun> runs) {
  if (runs.empty()) throw DataError("no subject runs to aggregate");
  AccuracyCurve out;
  const auto& first = runs.front().curve.points;
  for (std::size_t w = 0; w < first.size(); ++w) {
    std::vector<double> column;
    for (const auto& r : runs) {
      if (r.curve.points.size() != first.size() || r.curve.points[w].window_end_ms != first[w].window_end_ms)
        throw DataError("subject curves have different window grids");
      column.push_back(r.curve.points[w].mean);
    }
    out.points.push_back({first[w].window_end_ms, mean_of(column), sample_std(column), column.size()});
  }
  return out;
}

std::vector<SubjectRun> run_subjects(std::span<const EpochSet> sets, ClassPair pair, const EvalProtocol& protocol,
                                     unsigned jobs) {
  std::vector<SubjectRun> runs(sets.size());
  std::vector<std::exception_ptr> errors(sets.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < sets.size(); i = next++) {
      try {
        EvalProtocol p = protocol;
        p.seed = split_rng(protocol.seed, i);
        runs[i] = run_protocol(sets[i], pair, p);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(sets.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return runs;
}

std::optional<double> prediction_time(const AccuracyCurve& curve, double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw UsageError("prediction threshold must lie in (0.5, 1]");
  std::vector<CurvePoint> pts;
  for (const auto& p : curve.points)
    if (p.window_end_ms <= 0.0) pts.push_back(p);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.window_end_ms < b.window_end_ms; });
  std::optional<double> earliest;
  for (auto it = pts.rbegin(); it != pts.rend() && it->mean >= threshold; ++it) earliest = it->window_end_ms;
  return earliest;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw UsageError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> ebrt_values(std::span<const Event> events) {
  std::vector<double> out;
  std::optional<double> light;
  for (const auto& ev : events) {
    if (std::holds_alternative<BrakeLightOn>(ev.kind)) {
      if (light) throw DataError("brake light at " + format6(*light) + " ms has no pedal press");
      light = ev.time_ms;
    } else if (std::get<BrakePedalPress>(ev.kind).brake_class == ClassLabel::Emergency) {
      if (!light) throw DataError("emergency press at " + format6(ev.time_ms) + " ms has no brake light");
      out.push_back(ev.time_ms - *light);
      light.reset();
    }
  }
  if (light) throw DataError("brake light at " + format6(*light) + " ms has no pedal press");
  return out;
}

EbrtStats ebrt_stats(std::span<const double> ebrt_ms) {
  if (ebrt_ms.empty()) throw DataError("no emergency light/pedal pairs");
  EbrtStats s;
  s.n = ebrt_ms.size();
  s.mean_ms = mean_of(ebrt_ms);
  s.std_ms = sample_std(ebrt_ms);
  const auto [lo, hi] = std::minmax_element(ebrt_ms.begin(), ebrt_ms.end());
  s.min_ms = *lo;
  s.max_ms = *hi;
  std::vector<double> v(ebrt_ms.begin(), ebrt_ms.end());
  std::sort(v.begin(), v.end());
  for (std::size_t i = 0; i < kEbrtPercentiles.size(); ++i) s.percentiles[i] = percentile(v, kEbrtPercentiles[i]);
  return s;
}

namespace {

Eigen::VectorXd window_average(const EpochSet& set, double time_ms) {
  const double rate = set.sample_rate;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.channels()));
  const auto total = static_cast<std::int64_t>(set.samples_per_epoch());
  for (const auto& e : set.epochs) {
    const auto first = ms_to_samples(e.t0_offset_ms + time_ms - 25.0, rate);
    const auto last = ms_to_samples(e.t0_offset_ms + time_ms + 25.0, rate);
    if (first < 0 || last >= total)
      throw UsageError("topomap time " + format6(time_ms) + " ms lies outside the epochs");
    sum += e.samples.middleCols(first, last - first + 1).rowwise().mean();
  }
  return sum / static_cast<double>(set.epochs.size());
}

}  // namespace

std::vector<TopoValue> topomap_export(const EpochSet& a, const EpochSet& b, std::span<const double> times_ms) {
  if (!(a.montage == b.montage)) throw DataError("topomap sets have different montages");
  if (a.sample_rate != b.sample_rate) throw DataError("topomap sets have different sample rates");
  if (a.epochs.empty() || b.epochs.empty()) throw DataError("topomap needs nonempty epoch sets");
  std::vector<TopoValue> out;
  for (const double t : times_ms) {
    const Eigen::VectorXd diff = window_average(a, t) - window_average(b, t);
    for (std::size_t c = 0; c < a.channels(); ++c)
      out.push_back({a.montage.names()[c], a.montage.positions()[c].x, a.montage.positions()[c].y, t,
                     diff[static_cast<Eigen::Index>(c)]});
  }
  return out;
}

std::string topomap_csv(std::span<const TopoValue> values) {
  std::string out = "channel,x,y,time_ms,value_uv\n";
  for (const auto& v : values)
    out += v.channel + "," + format6(v.x) + "," + format6(v.y) + "," + format6(v.time_ms) + "," + format6(v.value_uv) +
           "\n";
  return out;
}

std::string curve_csv(const AccuracyCurve& curve) {
  std::string s = "window_end_ms,mean_acc,std_acc,n\n";
  for (const auto& p : curve.points)
    s += format6(p.window_end_ms) + "," + format6(p.mean) + "," + format6(p.std) + "," + std::to_string(p.n) + "\n";
  return s;
}

}  // namespace brakesense
