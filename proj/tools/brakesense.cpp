// brakesense: batch front end for simulation, preprocessing and evaluation.

#include "brakesense/config.hpp"
#include "brakesense/error.hpp"
#include "brakesense/eval.hpp"
#include "brakesense/io.hpp"
#include "brakesense/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brakesense;

namespace {

struct Common {
  std::string config;
  std::string seed;
  std::string out;
  unsigned jobs = 1;
  bool strict = false;
};

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw UsageError(what + " must be an unsigned 64-bit integer, got '" + text + "'");
  errno = 0;
  const auto v = std::strtoull(text.c_str(), nullptr, 10);
  if (errno == ERANGE) throw UsageError(what + " is out of range: '" + text + "'");
  return v;
}

PipelineConfig resolve_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_pipeline_config(c.config);
  if (!c.seed.empty())
    cfg.seed = parse_u64(c.seed, "--seed");
  else if (const char* env = std::getenv("BRAKESENSE_SEED"))
    cfg.seed = parse_u64(env, "BRAKESENSE_SEED");
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.protocol.seed = protocol_seed(cfg.seed);
  cfg.protocol.classifier.strict = c.strict;
  return cfg;
}

fs::path ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const auto probe = dir / ".write-probe";
  {
    std::FILE* f = std::fopen(probe.c_str(), "wb");
    if (!f) throw UsageError("output directory '" + dir.string() + "' is not writable");
    std::fclose(f);
  }
  fs::remove(probe, ec);
  return dir;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// Runs fn(i) for i < n on up to `jobs` threads; rethrows the first failure by index.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

json counts_json(const std::array<std::size_t, 3>& c) {
  return {{"emergency", c[0]}, {"normal", c[1]}, {"none", c[2]}};
}

// simulate ------------------------------------------------------------------

int cmd_simulate(const Common& common) {
  const PipelineConfig cfg = resolve_config(common);
  const fs::path out = ensure_dir(cfg.output_dir);
  ensure_dir(out / "recordings");
  const RngSeed root{cfg.seed};

  struct Item {
    std::size_t subject;
    DrivingMode mode;
  };
  std::vector<Item> items;
  for (std::size_t s = 0; s < cfg.subjects; ++s)
    for (auto mode : {DrivingMode::Emergency, DrivingMode::Normal}) items.push_back({s, mode});

  std::vector<json> entries(items.size());
  parallel_for(items.size(), common.jobs, [&](std::size_t i) {
    const auto rec = simulate_recording(cfg.sim, items[i].mode, items[i].subject, root);
    const std::string stem = rec.subject + "_" + std::string(to_string(items[i].mode));
    write_recording(rec, out / "recordings" / (stem + ".rec"));
    write_file_atomic(out / "recordings" / (stem + "_events.csv"), events_csv(rec.events));
    std::size_t presses = 0;
    for (const auto& ev : rec.events) presses += std::holds_alternative<BrakePedalPress>(ev.kind);
    entries[i] = {{"subject", rec.subject},
                  {"mode", to_string(items[i].mode)},
                  {"recording", "recordings/" + stem + ".rec"},
                  {"events", "recordings/" + stem + "_events.csv"},
                  {"presses", presses}};
  });

  write_json(out / "config.json", to_json(cfg));
  write_json(out / "manifest.json", {{"config_hash", hex64(config_hash(cfg))},
                                     {"seed", cfg.seed},
                                     {"subjects", cfg.subjects},
                                     {"recordings", entries}});
  std::cout << "simulated " << items.size() << " recordings for " << cfg.subjects << " subjects into "
            << out.string() << " (config " << hex64(config_hash(cfg)) << ")\n";
  return 0;
}

// preprocess ----------------------------------------------------------------

int cmd_preprocess(const Common& common, const std::vector<std::string>& inputs, const std::string& threshold) {
  if (inputs.empty()) throw UsageError("preprocess needs at least one recording file");
  PipelineConfig cfg = resolve_config(common);
  if (!threshold.empty()) {
    if (threshold == "inf" || threshold == "infinity") {
      cfg.pre.epochs.artifact_threshold_uv = std::numeric_limits<double>::infinity();
    } else {
      char* end = nullptr;
      const double t = std::strtod(threshold.c_str(), &end);
      if (end == threshold.c_str() || *end != '\0' || !(t > 0.0))
        throw UsageError("--threshold must be a positive number or 'inf', got '" + threshold + "'");
      cfg.pre.epochs.artifact_threshold_uv = t;
    }
  }
  const fs::path out = ensure_dir(cfg.output_dir);
  ensure_dir(out / "epochs");

  std::map<std::string, std::vector<ContinuousRecording>> by_subject;
  std::vector<std::string> sorted = inputs;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& path : sorted) {
    auto rec = read_recording(path);
    by_subject[rec.subject].push_back(std::move(rec));
  }
  std::vector<std::string> subjects;
  for (const auto& [s, _] : by_subject) subjects.push_back(s);

  const auto hash = config_hash(cfg);
  std::vector<PreprocessReport> reports(subjects.size());
  parallel_for(subjects.size(), common.jobs, [&](std::size_t i) {
    auto result = preprocess_recordings(by_subject.at(subjects[i]), cfg.pre, preprocess_seed(RngSeed{cfg.seed}, subjects[i]));
    result.set.provenance = make_provenance(subjects[i], result.report, hash);
    write_epochset(result.set, out / "epochs" / (subjects[i] + ".epo"));
    reports[i] = result.report;
  });

  json rows = json::array();
  std::size_t total = 0, rejected = 0;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& r = reports[i];
    total += r.total;
    rejected += r.rejected;
    rows.push_back({{"subject", subjects[i]},
                    {"total", r.total},
                    {"rejected", r.rejected},
                    {"skipped_presses", r.skipped},
                    {"kept_per_class", counts_json(r.kept_per_class)}});
  }
  const double fraction = total ? static_cast<double>(rejected) / static_cast<double>(total) : 0.0;
  write_json(out / "rejection_report.json", {{"total", total},
                                             {"rejected", rejected},
                                             {"rejected_fraction", round6(fraction)},
                                             {"artifact_threshold_uv", format6(cfg.pre.epochs.artifact_threshold_uv)},
                                             {"subjects", rows}});
  std::cout << "preprocessed " << subjects.size() << " subjects: " << rejected << " of " << total
            << " epochs rejected (" << format6(100.0 * fraction) << "%)\n";
  return 0;
}

// evaluate ------------------------------------------------------------------

std::optional<CurvePoint> point_at(const AccuracyCurve& curve, double t) {
  for (const auto& p : curve.points)
    if (std::abs(p.window_end_ms - t) < 1e-9) return p;
  return std::nullopt;
}

json point_json(const std::optional<CurvePoint>& p) {
  if (!p) return nullptr;
  return {{"mean", round6(p->mean)}, {"std", round6(p->std)}, {"n", p->n}};
}

json round_all(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(round6(x));
  return a;
}

int cmd_evaluate(const Common& common, const std::vector<std::string>& inputs, const std::string& pair_name,
                 const std::string& clf) {
  if (inputs.empty()) throw UsageError("evaluate needs at least one epoch-set file");
  PipelineConfig cfg = resolve_config(common);
  const auto pair = parse_class_pair(pair_name);
  if (!pair) throw UsageError("unknown pair '" + pair_name + "'");
  std::vector<ClassifierKind> kinds;
  if (clf == "all")
    kinds = {ClassifierKind::CspLda, ClassifierKind::Rmdm, ClassifierKind::Cnn};
  else if (const auto k = parse_classifier_kind(clf))
    kinds = {*k};
  else
    throw UsageError("unknown classifier '" + clf + "' (valid: csp-lda, rmdm, cnn, all)");

  std::vector<EpochSet> sets;
  for (const auto& path : inputs) sets.push_back(read_epochset(path));
  const fs::path out = ensure_dir(cfg.output_dir);

  for (const auto kind : kinds) {
    EvalProtocol protocol = cfg.protocol;
    protocol.classifier.kind = kind;
    const auto started = std::chrono::steady_clock::now();
    const auto runs = run_subjects(sets, *pair, protocol, common.jobs);
    const auto curve = aggregate(runs);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    json subjects = json::array();
    std::size_t ties = 0, rejected = 0, nonconverged = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i];
      const auto subject_rejected = provenance_field(sets[i].provenance, "rejected");
      const std::size_t rej = subject_rejected ? std::stoul(*subject_rejected) : 0;
      ties += r.ties;
      rejected += rej;
      nonconverged += r.mean_nonconverged;
      json reps = json::array();
      for (const auto& acc : r.repetition_accuracy) reps.push_back(round_all(acc));
      subjects.push_back({{"subject", provenance_field(sets[i].provenance, "subject").value_or(sets[i].provenance)},
                          {"counts_before_balancing", counts_json(r.counts_before)},
                          {"counts_after_balancing", counts_json(r.counts_after)},
                          {"rejected_epochs", rej},
                          {"test_epochs_per_repetition", r.test_epochs},
                          {"ties", r.ties},
                          {"mean_nonconverged", r.mean_nonconverged},
                          {"accuracy_at_0_ms", point_json(point_at(r.curve, 0.0))},
                          {"repetition_accuracy", reps}});
    }
    json prediction = json::object();
    for (double th : {0.75, 0.8, 0.9}) {
      const auto t = prediction_time(curve, th);
      prediction[format6(th)] = t ? json(round6(*t)) : json(nullptr);
    }
    std::vector<double> ends;
    for (const auto& p : curve.points) ends.push_back(p.window_end_ms);
    json report = {{"pair", to_string(*pair)},
                   {"classifier", to_string(kind)},
                   {"seed", cfg.seed},
                   {"config_hash", hex64(config_hash(cfg))},
                   {"repetitions", protocol.repetitions},
                   {"window_ends_ms", round_all(ends)},
                   {"accuracy_at_0_ms", point_json(point_at(curve, 0.0))},
                   {"accuracy_at_minus_100_ms", point_json(point_at(curve, -100.0))},
                   {"prediction_time_ms", prediction},
                   {"ties", ties},
                   {"rejected_epochs", rejected},
                   {"mean_nonconverged", nonconverged},
                   {"subjects", subjects}};

    const fs::path dir = ensure_dir(out / (std::string(to_string(*pair)) + "_" + std::string(to_string(kind))));
    write_file_atomic(dir / "curve.csv", curve_csv(curve));
    write_json(dir / "report.json", report);
    write_json(dir / "timing.json", {{"wall_time_s", round6(wall)}, {"jobs", common.jobs}});
    const auto at0 = point_at(curve, 0.0);
    std::cout << to_string(*pair) << " " << to_string(kind) << ": accuracy at 0 ms "
              << (at0 ? format6(at0->mean) + " +- " + format6(at0->std) : std::string("n/a")) << " -> "
              << dir.string() << "\n";
  }
  return 0;
}

// report --------------------------------------------------------------------

int cmd_report(const Common& common, const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw UsageError("report needs at least one run directory");
  struct Row {
    std::string pair, clf;
    json at0, at100, pt;
  };
  std::vector<Row> rows;
  for (const auto& d : dirs) {
    const fs::path path = fs::path(d) / "report.json";
    if (!fs::exists(path)) throw DataError("run directory '" + d + "' has no report.json");
    json j;
    try {
      const auto bytes = read_file(path);
      j = json::parse(bytes.begin(), bytes.end());
      rows.push_back({j.at("pair").get<std::string>(), j.at("classifier").get<std::string>(),
                      j.at("accuracy_at_0_ms"), j.at("accuracy_at_minus_100_ms"),
                      j.at("prediction_time_ms").value("0.75", json(nullptr))});
    } catch (const json::exception& e) {
      throw DataError("run directory '" + d + "' has a malformed report.json: " + e.what());
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.pair, a.clf) < std::tie(b.pair, b.clf);
  });

  const auto cell = [](const json& p) {
    return p.is_null() ? std::string("n/a") : format6(p.at("mean").get<double>()) + " +- " + format6(p.at("std").get<double>());
  };
  const auto num = [](const json& v) { return v.is_null() ? std::string("") : format6(v.get<double>()); };
  std::string csv = "pair,classifier,acc_0ms_mean,acc_0ms_std,acc_minus100ms_mean,acc_minus100ms_std,prediction_time_075_ms\n";
  std::printf("%-22s %-8s %-24s %-24s %s\n", "pair", "clf", "acc @ 0 ms", "acc @ -100 ms", "t(0.75) ms");
  for (const auto& r : rows) {
    std::printf("%-22s %-8s %-24s %-24s %s\n", r.pair.c_str(), r.clf.c_str(), cell(r.at0).c_str(), cell(r.at100).c_str(),
                r.pt.is_null() ? "none" : num(r.pt).c_str());
    const auto field = [&](const json& p, const char* k) { return p.is_null() ? std::string("") : num(p.at(k)); };
    csv += r.pair + "," + r.clf + "," + field(r.at0, "mean") + "," + field(r.at0, "std") + "," + field(r.at100, "mean") +
           "," + field(r.at100, "std") + "," + num(r.pt) + "\n";
  }
  const fs::path out = ensure_dir(common.out.empty() ? fs::path(".") : fs::path(common.out));
  write_file_atomic(out / "summary.csv", csv);
  return 0;
}

// topomap / ebrt ------------------------------------------------------------

EpochSet pool_class(const std::vector<EpochSet>& sets, ClassLabel label) {
  EpochSet out;
  out.montage = sets.front().montage;
  out.sample_rate = sets.front().sample_rate;
  for (const auto& s : sets) {
    if (!(s.montage == out.montage) || s.sample_rate != out.sample_rate)
      throw DataError("epoch sets differ in montage or sample rate");
    for (const auto& e : s.epochs)
      if (e.label == label) out.epochs.push_back(e);
  }
  if (out.epochs.empty()) throw DataError("no '" + std::string(to_string(label)) + "' epochs in the inputs");
  return out;
}

int cmd_topomap(const Common& common, const std::vector<std::string>& inputs, const std::string& a,
                const std::string& b, std::vector<double> times) {
  if (inputs.empty()) throw UsageError("topomap needs at least one epoch-set file");
  const auto la = parse_class_label(a);
  const auto lb = parse_class_label(b);
  if (!la || !lb) throw UsageError("classes must be emergency, normal or none");
  if (times.empty())
    for (int t = -1000; t <= 0; t += 100) times.push_back(t);
  const PipelineConfig cfg = resolve_config(common);
  std::vector<EpochSet> sets;
  for (const auto& path : inputs) sets.push_back(read_epochset(path));
  const auto values = topomap_export(pool_class(sets, *la), pool_class(sets, *lb), times);
  const fs::path out = ensure_dir(cfg.output_dir);
  write_file_atomic(out / "topomap.csv", topomap_csv(values));
  std::cout << "wrote " << values.size() << " rows to " << (out / "topomap.csv").string() << "\n";
  return 0;
}

int cmd_ebrt(const Common& common, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw UsageError("ebrt needs at least one recording file");
  const PipelineConfig cfg = resolve_config(common);
  std::vector<double> values;
  for (const auto& path : inputs) {
    const auto rec = read_recording(path);
    const auto v = ebrt_values(rec.events);
    values.insert(values.end(), v.begin(), v.end());
  }
  const auto s = ebrt_stats(values);
  json pct = json::object();
  for (std::size_t i = 0; i < kEbrtPercentiles.size(); ++i)
    pct["P" + format6(kEbrtPercentiles[i])] = round6(s.percentiles[i]);
  const fs::path out = ensure_dir(cfg.output_dir);
  write_json(out / "ebrt.json", {{"n", s.n},
                                 {"mean_ms", round6(s.mean_ms)},
                                 {"std_ms", round6(s.std_ms)},
                                 {"min_ms", round6(s.min_ms)},
                                 {"max_ms", round6(s.max_ms)},
                                 {"percentiles", pct}});
  std::cout << "EBRT n=" << s.n << " mean " << format6(s.mean_ms) << " +- " << format6(s.std_ms) << " ms\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG braking-intention decoding toolkit"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON pipeline config (defaults when omitted)");
    sub->add_option("--seed", common.seed, "root seed (falls back to BRAKESENSE_SEED, then the config)");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--jobs", common.jobs, "parallel subjects")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "generate synthetic driving sessions");
  add_common(simulate);

  std::vector<std::string> inputs;
  std::string threshold;
  auto* preprocess = app.add_subcommand("preprocess", "filter, epoch and clean recordings");
  add_common(preprocess);
  preprocess->add_option("recordings", inputs, "recording files (.rec)");
  preprocess->add_option("--threshold", threshold, "artifact threshold in uV, or 'inf'");

  std::string pair = "emergency-vs-none";
  std::string clf = "rmdm";
  auto* evaluate = app.add_subcommand("evaluate", "sliding-window accuracy curves");
  add_common(evaluate);
  evaluate->add_option("epochsets", inputs, "epoch-set files (.epo), one per subject");
  evaluate->add_option("--pair", pair, "class pair")
      ->check(CLI::IsMember({"emergency-vs-none", "normal-vs-none", "emergency-vs-normal"}));
  evaluate->add_option("--clf", clf, "classifier")->check(CLI::IsMember({"csp-lda", "rmdm", "cnn", "all"}));
  evaluate->add_flag("--strict", common.strict, "treat geometric-mean non-convergence as an error");

  auto* report = app.add_subcommand("report", "summary table over run directories");
  report->add_option("runs", inputs, "run directories");
  report->add_option("--out", common.out, "directory for summary.csv");

  std::string class_a = "emergency", class_b = "none";
  std::vector<double> times;
  auto* topomap = app.add_subcommand("topomap", "grand-average difference maps");
  add_common(topomap);
  topomap->add_option("epochsets", inputs, "epoch-set files (.epo)");
  topomap->add_option("--class-a", class_a, "minuend class");
  topomap->add_option("--class-b", class_b, "subtrahend class");
  topomap->add_option("--times", times, "times in ms relative to pedal onset")->delimiter(',');

  auto* ebrt = app.add_subcommand("ebrt", "emergency braking response time statistics");
  add_common(ebrt);
  ebrt->add_option("recordings", inputs, "recording files (.rec)");

  app.add_subcommand("default-config", "print the default pipeline config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*preprocess) return cmd_preprocess(common, inputs, threshold);
    if (*evaluate) return cmd_evaluate(common, inputs, pair, clf);
    if (*report) return cmd_report(common, inputs);
    if (*topomap) return cmd_topomap(common, inputs, class_a, class_b, times);
    if (*ebrt) return cmd_ebrt(common, inputs);
    std::cout << to_json(PipelineConfig{}).dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
