#pragma once

#include "brakesense/model.hpp"
#include "brakesense/rng.hpp"
#include "brakesense/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brakesense {

enum class ClassPair { EmergencyVsNone, NormalVsNone, EmergencyVsNormal };

std::string_view to_string(ClassPair pair);  // "emergency-vs-none", ...
std::optional<ClassPair> parse_class_pair(std::string_view text);
/// Binary label 0 is the first class, 1 the second.
std::array<ClassLabel, 2> classes_of(ClassPair pair);

/// Keeps only the two classes, downsampling the larger one without
/// replacement to the smaller count. Survivors keep their original order.
EpochSet balance_classes(const EpochSet& set, std::array<ClassLabel, 2> classes, RngSeed seed);

struct Split {
  EpochSet train;
  EpochSet test;
  std::vector<std::size_t> train_indices;  // into the input set, ascending
  std::vector<std::size_t> test_indices;
};

/// Stratified split; per class round(n * fraction) (halves up) training
/// epochs, clamped so both sides keep at least one.
Split split_half(const EpochSet& set, double train_fraction, RngSeed seed);

double accuracy(std::span<const ClassLabel> predictions, std::span<const ClassLabel> labels);

struct EvalProtocol {
  int repetitions = 10;
  double train_fraction = 0.5;
  double train_window_start_ms = -1000.0;  // relative to pedal onset
  double train_window_end_ms = 0.0;
  double test_window_len_ms = 1000.0;
  double window_step_ms = 50.0;
  double first_window_end_ms = -2000.0;
  double last_window_end_ms = 1000.0;
  ClassifierConfig classifier;
  RngSeed seed{1};

  void validate() const;
  /// Window end points, first to last inclusive.
  std::vector<double> window_ends() const;
  /// Throws UsageError if any window leaves the epochs of `set`.
  void check_fits(const EpochSet& set) const;
};

struct CurvePoint {
  double window_end_ms = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;  // number of averaged curves
};

struct AccuracyCurve {
  std::vector<CurvePoint> points;
};

struct SubjectRun {
  std::string subject;
  std::array<std::size_t, 3> counts_before{};  // per class, before balancing
  std::array<std::size_t, 3> counts_after{};
  std::size_t rejected = 0;                    // artifact rejections recorded upstream
  std::vector<std::vector<double>> repetition_accuracy;  // [repetition][window]
  std::size_t test_epochs = 0;                 // per repetition
  std::size_t ties = 0;
  std::size_t mean_nonconverged = 0;           // RMDM fits whose geometric mean did not converge
  AccuracyCurve curve;                         // mean and std over repetitions
};

/// Called with the ids (indices into the balanced set) of the epochs handed to each fit.
using FitObserver = std::function<void(std::span<const std::size_t>)>;

/// Trains once per repetition on the train window and slides the test window
/// over held-out epochs. `set` may hold other classes; it is balanced first.
SubjectRun run_protocol(const EpochSet& set, ClassPair pair, const EvalProtocol& protocol,
                        const FitObserver& observer = {});

/// window_end_ms,mean_acc,std_acc,n rows in format6 notation.
std::string curve_csv(const AccuracyCurve& curve);

/// Mean and std over subjects of per-subject mean curves.
AccuracyCurve aggregate(std::span<const SubjectRun> runs);

/// Evaluates subjects on up to `jobs` threads; subject i uses split_rng(seed, i).
std::vector<SubjectRun> run_subjects(std::span<const EpochSet> sets, ClassPair pair, const EvalProtocol& protocol,
                                     unsigned jobs);

/// Earliest window end t* <= 0 with mean >= threshold at every point in [t*, 0].
std::optional<double> prediction_time(const AccuracyCurve& curve, double threshold);

struct EbrtStats {
  std::size_t n = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::array<double, 5> percentiles{};  // P5, P25, P50, P75, P95
};

inline constexpr std::array<double, 5> kEbrtPercentiles{5, 25, 50, 75, 95};

/// Linear interpolation between order statistics (p in [0, 100]).
double percentile(std::vector<double> values, double p);

/// Light-on to pedal-press intervals of every emergency pair.
std::vector<double> ebrt_values(std::span<const Event> events);
EbrtStats ebrt_stats(std::span<const double> ebrt_ms);

struct TopoValue {
  std::string channel;
  double x = 0.0;
  double y = 0.0;
  double time_ms = 0.0;
  double value_uv = 0.0;
};

/// Grand average of a minus grand average of b, each averaged over +-25 ms
/// around the requested times (relative to pedal onset).
std::vector<TopoValue> topomap_export(const EpochSet& a, const EpochSet& b, std::span<const double> times_ms);
std::string topomap_csv(std::span<const TopoValue> values);

}  // namespace brakesense
