#include "brakesense/config.hpp"

#include "brakesense/error.hpp"
#include "brakesense/io.hpp"

#include <set>

namespace brakesense {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError(path_ + ": expected an object");
  }

  const std::string& path() const { return path_; }

  double number(const char* key) {
    const json& v = at(key);
    if (!v.is_number()) throw UsageError(sub(key) + ": expected a number");
    return v.get<double>();
  }
  std::int64_t integer(const char* key, std::int64_t lo, std::int64_t hi) {
    const json& v = at(key);
    if (!v.is_number_integer()) throw UsageError(sub(key) + ": expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi))
      throw UsageError(sub(key) + ": out of range");
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi) throw UsageError(sub(key) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }
  std::uint64_t unsigned64(const char* key) {
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw UsageError(sub(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::string string(const char* key) {
    const json& v = at(key);
    if (!v.is_string()) throw UsageError(sub(key) + ": expected a string");
    return v.get<std::string>();
  }
  Range range(const char* key) {
    const json& v = at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw UsageError(sub(key) + ": expected [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
  }
  Node object(const char* key) { return Node(at(key), sub(key)); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw UsageError(sub(k.c_str()) + ": unknown key");
  }

 private:
  std::string sub(const char* key) const { return path_ + "." + key; }
  const json& at(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) throw UsageError(sub(key) + ": missing required field");
    used_.insert(key);
    return *it;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename F>
void validated(const std::string& path, F&& validate) {
  try {
    validate();
  } catch (const UsageError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

constexpr std::int64_t kIntMax = 1'000'000'000;

}  // namespace

RngSeed protocol_seed(std::uint64_t root) { return split_rng(RngSeed{root}, 0x7000); }

PipelineConfig parse_pipeline_config(const json& doc) {
  PipelineConfig cfg;
  Node root(doc, "$");
  cfg.seed = root.unsigned64("seed");
  cfg.subjects = static_cast<std::size_t>(root.integer("subjects", 1, 10000));
  cfg.output_dir = root.string("output_dir");

  {
    Node n = root.object("scenario");
    auto& s = cfg.sim.scenario;
    s.session_minutes = n.number("session_minutes");
    s.inter_event_s = n.range("inter_event_s");
    s.lead_speed_kmh = n.number("lead_speed_kmh");
    s.gap_m = n.range("gap_m");
    n.finish();
    validated(n.path(), [&] { s.validate(); });
  }
  {
    Node n = root.object("reaction_time");
    auto& r = cfg.sim.rt;
    r.shift_ms = n.number("shift_ms");
    r.mu = n.number("mu");
    r.sigma = n.number("sigma");
    r.min_ms = n.number("min_ms");
    r.max_ms = n.number("max_ms");
    n.finish();
    validated(n.path(), [&] { r.validate(); });
  }
  {
    Node n = root.object("erp");
    auto& e = cfg.sim.erp;
    e.occipital_peak_uv = n.number("occipital_peak_uv");
    e.occipital_onset_ms = n.number("occipital_onset_ms");
    e.occipital_peak_ms = n.number("occipital_peak_ms");
    e.occipital_offset_ms = n.number("occipital_offset_ms");
    e.motor_negativity_uv = n.number("motor_negativity_uv");
    e.motor_onset_ms = n.number("motor_onset_ms");
    e.motor_peak_ms = n.number("motor_peak_ms");
    e.motor_offset_ms = n.number("motor_offset_ms");
    e.normal_negativity_uv = n.number("normal_negativity_uv");
    e.normal_onset_ms = n.number("normal_onset_ms");
    e.normal_offset_ms = n.number("normal_offset_ms");
    e.amplitude_scale = n.number("amplitude_scale");
    n.finish();
    validated(n.path(), [&] { e.validate(); });
  }
  {
    Node n = root.object("noise");
    auto& z = cfg.sim.noise;
    z.rms_uv = n.number("rms_uv");
    z.spatial_decay = n.number("spatial_decay");
    z.sensor_noise_uv = n.number("sensor_noise_uv");
    z.blink_rate_per_min = n.number("blink_rate_per_min");
    z.blink_amplitude_uv = n.number("blink_amplitude_uv");
    z.outlier_probability = n.number("outlier_probability");
    z.outlier_amplitude_uv = n.number("outlier_amplitude_uv");
    n.finish();
    validated(n.path(), [&] { z.validate(); });
  }
  {
    Node n = root.object("filter");
    auto& f = cfg.pre.filter;
    f.low_hz = n.number("low_hz");
    f.high_hz = n.number("high_hz");
    f.num_taps = static_cast<int>(n.integer("num_taps", 3, 100001));
    n.finish();
    validated(n.path(), [&] { design_bandpass(f); });
  }
  {
    Node n = root.object("epochs");
    auto& e = cfg.pre.epochs;
    e.pre_ms = n.number("pre_ms");
    e.post_ms = n.number("post_ms");
    e.baseline_ms = n.number("baseline_ms");
    e.artifact_threshold_uv = n.number("artifact_threshold_uv");
    e.no_brake_min_separation_ms = n.number("no_brake_min_separation_ms");
    e.no_brake_window_ms = n.number("no_brake_window_ms");
    cfg.pre.no_brake_count = static_cast<std::size_t>(n.integer("no_brake_count", 1, kIntMax));
    n.finish();
    validated(n.path(), [&] { e.validate(); });
  }
  {
    Node n = root.object("protocol");
    auto& p = cfg.protocol;
    p.repetitions = static_cast<int>(n.integer("repetitions", 1, 100000));
    p.train_fraction = n.number("train_fraction");
    const Range train = n.range("train_window_ms");
    p.train_window_start_ms = train.lo;
    p.train_window_end_ms = train.hi;
    p.test_window_len_ms = n.number("test_window_len_ms");
    p.window_step_ms = n.number("window_step_ms");
    const Range ends = n.range("window_end_range_ms");
    p.first_window_end_ms = ends.lo;
    p.last_window_end_ms = ends.hi;
    Node c = n.object("classifier");
    auto& k = p.classifier;
    k.shrinkage = c.number("shrinkage");
    k.csp_pairs = static_cast<int>(c.integer("csp_pairs", 1, 1000));
    k.mean_tolerance = c.number("mean_tolerance");
    k.mean_max_iter = static_cast<int>(c.integer("mean_max_iter", 1, 100000));
    Node m = c.object("cnn");
    auto& cnn = k.cnn;
    cnn.f1 = static_cast<int>(m.integer("f1", 1, 1024));
    cnn.depth = static_cast<int>(m.integer("depth", 1, 1024));
    cnn.f2 = static_cast<int>(m.integer("f2", 1, 1024));
    cnn.kernel_length = static_cast<int>(m.integer("kernel_length", 1, 10000));
    cnn.separable_length = static_cast<int>(m.integer("separable_length", 1, 10000));
    cnn.pool1 = static_cast<int>(m.integer("pool1", 1, 1000));
    cnn.pool2 = static_cast<int>(m.integer("pool2", 1, 1000));
    cnn.dropout = m.number("dropout");
    cnn.epochs = static_cast<int>(m.integer("epochs", 0, 1000000));
    cnn.batch_size = static_cast<int>(m.integer("batch_size", 1, 1000000));
    cnn.learning_rate = m.number("learning_rate");
    cnn.momentum = m.number("momentum");
    m.finish();
    c.finish();
    n.finish();
    validated(n.path(), [&] { p.validate(); });
  }
  root.finish();
  cfg.protocol.seed = protocol_seed(cfg.seed);
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  json doc;
  try {
    const auto bytes = read_file(path);
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return parse_pipeline_config(doc);
}

json to_json(const PipelineConfig& cfg) {
  const auto& s = cfg.sim.scenario;
  const auto& r = cfg.sim.rt;
  const auto& e = cfg.sim.erp;
  const auto& z = cfg.sim.noise;
  const auto& f = cfg.pre.filter;
  const auto& w = cfg.pre.epochs;
  const auto& p = cfg.protocol;
  const auto& k = p.classifier;
  const auto& c = k.cnn;
  json j;
  j["seed"] = cfg.seed;
  j["subjects"] = cfg.subjects;
  j["output_dir"] = cfg.output_dir;
  j["scenario"] = {{"session_minutes", s.session_minutes},
                   {"inter_event_s", {s.inter_event_s.lo, s.inter_event_s.hi}},
                   {"lead_speed_kmh", s.lead_speed_kmh},
                   {"gap_m", {s.gap_m.lo, s.gap_m.hi}}};
  j["reaction_time"] = {{"shift_ms", r.shift_ms}, {"mu", r.mu}, {"sigma", r.sigma}, {"min_ms", r.min_ms},
                        {"max_ms", r.max_ms}};
  j["erp"] = {{"occipital_peak_uv", e.occipital_peak_uv},     {"occipital_onset_ms", e.occipital_onset_ms},
              {"occipital_peak_ms", e.occipital_peak_ms},     {"occipital_offset_ms", e.occipital_offset_ms},
              {"motor_negativity_uv", e.motor_negativity_uv}, {"motor_onset_ms", e.motor_onset_ms},
              {"motor_peak_ms", e.motor_peak_ms},             {"motor_offset_ms", e.motor_offset_ms},
              {"normal_negativity_uv", e.normal_negativity_uv}, {"normal_onset_ms", e.normal_onset_ms},
              {"normal_offset_ms", e.normal_offset_ms},       {"amplitude_scale", e.amplitude_scale}};
  j["noise"] = {{"rms_uv", z.rms_uv},
                {"spatial_decay", z.spatial_decay},
                {"sensor_noise_uv", z.sensor_noise_uv},
                {"blink_rate_per_min", z.blink_rate_per_min},
                {"blink_amplitude_uv", z.blink_amplitude_uv},
                {"outlier_probability", z.outlier_probability},
                {"outlier_amplitude_uv", z.outlier_amplitude_uv}};
  j["filter"] = {{"low_hz", f.low_hz}, {"high_hz", f.high_hz}, {"num_taps", f.num_taps}};
  j["epochs"] = {{"pre_ms", w.pre_ms},
                 {"post_ms", w.post_ms},
                 {"baseline_ms", w.baseline_ms},
                 {"artifact_threshold_uv", w.artifact_threshold_uv},
                 {"no_brake_min_separation_ms", w.no_brake_min_separation_ms},
                 {"no_brake_window_ms", w.no_brake_window_ms},
                 {"no_brake_count", cfg.pre.no_brake_count}};
  j["protocol"] = {
      {"repetitions", p.repetitions},
      {"train_fraction", p.train_fraction},
      {"train_window_ms", {p.train_window_start_ms, p.train_window_end_ms}},
      {"test_window_len_ms", p.test_window_len_ms},
      {"window_step_ms", p.window_step_ms},
      {"window_end_range_ms", {p.first_window_end_ms, p.last_window_end_ms}},
      {"classifier",
       {{"shrinkage", k.shrinkage},
        {"csp_pairs", k.csp_pairs},
        {"mean_tolerance", k.mean_tolerance},
        {"mean_max_iter", k.mean_max_iter},
        {"cnn",
         {{"f1", c.f1},
          {"depth", c.depth},
          {"f2", c.f2},
          {"kernel_length", c.kernel_length},
          {"separable_length", c.separable_length},
          {"pool1", c.pool1},
          {"pool2", c.pool2},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum}}}}}};
  return j;
}

std::uint64_t config_hash(const PipelineConfig& config) {
  // output location does not change results
  auto j = to_json(config);
  j.erase("output_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace brakesense
