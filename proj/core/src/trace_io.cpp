#include "dce/trace_io.hpp"

#include "dce/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace dce {

namespace {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

ojson optional_number(const std::optional<double>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

ojson config_json(const AttackConfig& cfg) {
  ojson sampler;
  sampler["kind"] = cfg.sampler.kind == SamplerKind::kFull ? "full" : "lowfreq";
  sampler["dct_factor"] = cfg.sampler.dct_factor;
  if (cfg.sampler.shape) {
    sampler["shape"] = {cfg.sampler.shape->channels, cfg.sampler.shape->height,
                        cfg.sampler.shape->width};
  } else {
    sampler["shape"] = nullptr;
  }
  ojson j;
  j["algo"] = std::string(to_string(cfg.algo));
  j["mode"] = std::string(to_string(cfg.mode));
  j["n0"] = cfg.n0;
  j["sigma"] = cfg.sigma;
  j["tol"] = cfg.tol;
  j["tol_relative"] = cfg.tol_relative;
  j["alpha"] = cfg.alpha;
  j["abort_factor"] = cfg.abort_factor;
  j["abort_protocol"] = cfg.abort_protocol;
  j["max_queries"] = cfg.max_queries;
  j["max_iterations"] = cfg.max_iterations;
  j["sampler"] = sampler;
  j["seed"] = cfg.seed;
  return j;
}

[[noreturn]] void schema(const std::string& what) {
  throw Error(ErrorCode::kSchemaError, what);
}

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    schema(std::string("field '") + key + "': " + e.what());
  }
}

AttackConfig overlay_config(const json& j, AttackConfig cfg) {
  if (!j.is_object()) schema("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "algo") {
      cfg.algo = parse_algo(get_as<std::string>(j, "algo"));
    } else if (key == "mode") {
      cfg.mode = parse_mode(get_as<std::string>(j, "mode"));
    } else if (key == "n0") {
      cfg.n0 = get_as<std::uint64_t>(j, "n0");
    } else if (key == "sigma") {
      cfg.sigma = get_as<double>(j, "sigma");
    } else if (key == "tol") {
      cfg.tol = get_as<double>(j, "tol");
    } else if (key == "tol_relative") {
      cfg.tol_relative = get_as<bool>(j, "tol_relative");
    } else if (key == "alpha") {
      cfg.alpha = get_as<double>(j, "alpha");
    } else if (key == "abort_factor") {
      cfg.abort_factor = get_as<double>(j, "abort_factor");
    } else if (key == "abort_protocol") {
      cfg.abort_protocol = get_as<bool>(j, "abort_protocol");
    } else if (key == "max_queries") {
      cfg.max_queries = get_as<std::uint64_t>(j, "max_queries");
    } else if (key == "max_iterations") {
      cfg.max_iterations = get_as<std::uint64_t>(j, "max_iterations");
    } else if (key == "seed") {
      cfg.seed = get_as<std::uint64_t>(j, "seed");
    } else if (key == "sampler") {
      if (!value.is_object()) schema("sampler must be an object");
      if (value.contains("kind")) {
        const auto kind = get_as<std::string>(value, "kind");
        if (kind == "full") {
          cfg.sampler.kind = SamplerKind::kFull;
        } else if (kind == "lowfreq") {
          cfg.sampler.kind = SamplerKind::kLowFrequency;
        } else {
          schema("sampler.kind must be full or lowfreq");
        }
      }
      if (value.contains("dct_factor")) {
        cfg.sampler.dct_factor = get_as<int>(value, "dct_factor");
      }
      if (value.contains("shape")) {
        if (value["shape"].is_null()) {
          cfg.sampler.shape.reset();
        } else {
          const auto s = get_as<std::vector<int>>(value, "shape");
          if (s.size() != 3) schema("sampler.shape must be [C,H,W]");
          cfg.sampler.shape = ImageShape{s[0], s[1], s[2]};
        }
      }
    } else {
      schema("unknown config key '" + key + "'");
    }
  }
  return cfg;
}

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) schema(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

IterationRecord parse_record(const json& j) {
  IterationRecord r;
  r.iteration = get_as<std::uint64_t>(j, "iteration");
  r.queries = get_as<std::uint64_t>(j, "queries");
  r.l2 = get_as<double>(j, "l2");
  r.gamma = read_optional(j, "gamma");
  r.theta_hat = read_optional(j, "theta_hat");
  r.kappa_norm = read_optional(j, "kappa_norm");
  r.kappa_input = read_optional(j, "kappa_input");
  r.branch = parse_branch(get_as<std::string>(j, "branch"));
  return r;
}

}  // namespace

std::string config_to_json(const AttackConfig& cfg) { return config_json(cfg).dump(); }

AttackConfig config_from_json(const std::string& json_text, const AttackConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema(std::string("config JSON: ") + e.what());
  }
  return overlay_config(j, base);
}

std::string record_to_json(const IterationRecord& rec) {
  ojson j;
  j["iteration"] = rec.iteration;
  j["queries"] = rec.queries;
  j["l2"] = rec.l2;
  j["gamma"] = optional_number(rec.gamma);
  j["theta_hat"] = optional_number(rec.theta_hat);
  j["kappa_norm"] = optional_number(rec.kappa_norm);
  j["kappa_input"] = optional_number(rec.kappa_input);
  j["branch"] = std::string(to_string(rec.branch));
  return j.dump();
}

void write_trace(std::ostream& out, const AttackTrace& trace) {
  ojson header;
  header["config"] = config_json(trace.config);
  header["source_label"] = trace.source_label;
  header["target_label"] =
      trace.target_label ? ojson(*trace.target_label) : ojson(nullptr);
  out << header.dump() << '\n';
  for (const IterationRecord& rec : trace.records) out << record_to_json(rec) << '\n';

  ojson fin;
  fin["l2"] = trace.final_point.l2;
  fin["queries"] = trace.records.empty() ? 0 : trace.records.back().queries;
  fin["partial"] = trace.partial;
  fin["error"] = trace.error;
  fin["x"] = std::vector<double>(trace.final_point.x.data(),
                                 trace.final_point.x.data() + trace.final_point.x.size());
  ojson footer;
  footer["final"] = fin;
  out << footer.dump() << '\n';
}

void write_trace(const std::filesystem::path& file, const AttackTrace& trace) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kBadConfig, "cannot write trace " + file.string());
  write_trace(out, trace);
}

AttackTrace read_trace(std::istream& in) {
  AttackTrace trace;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        schema(e.what());
      }
      if (!j.is_object()) schema("line is not a JSON object");
      if (j.contains("config")) {
        trace.config = overlay_config(j["config"], AttackConfig{});
        trace.source_label = get_as<Label>(j, "source_label");
        if (j.contains("target_label") && !j["target_label"].is_null()) {
          trace.target_label = get_as<Label>(j, "target_label");
        }
        have_header = true;
      } else if (j.contains("final")) {
        const json& f = j["final"];
        trace.final_point.l2 = get_as<double>(f, "l2");
        trace.final_point.query_index = get_as<std::uint64_t>(f, "queries");
        trace.partial = f.value("partial", false);
        trace.error = f.value("error", std::string());
        if (f.contains("x")) {
          const auto x = get_as<std::vector<double>>(f, "x");
          trace.final_point.x = Eigen::Map<const Vector>(x.data(),
                                                         static_cast<Eigen::Index>(x.size()));
        }
      } else if (j.contains("iteration")) {
        trace.records.push_back(parse_record(j));
      } else {
        schema("unrecognized trace line");
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaError,
                  "trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header && trace.records.empty()) {
    throw Error(ErrorCode::kSchemaError, "empty trace");
  }
  return trace;
}

AttackTrace read_trace(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kSchemaError, "cannot open trace " + file.string());
  return read_trace(in);
}

}  // namespace dce
