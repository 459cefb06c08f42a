#include "dce/oracle_spec.hpp"

#include "dce/errors.hpp"
#include "dce/external_oracle.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace dce {

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::kBadConfig, "oracle spec: " + what);
}

double parse_real(const std::string& s, const std::string& key) {
  if (s.empty()) bad("empty value for '" + key + "'");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (*end != '\0' || errno == ERANGE) bad("'" + s + "' is not a number (key '" + key + "')");
  return v;
}

long parse_int(const std::string& s, const std::string& key) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') bad("'" + s + "' is not an integer (key '" + key + "')");
  return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(parse_real(tok, key));
  if (out.empty()) bad("empty vector for '" + key + "'");
  return out;
}

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_keys(const std::string& body) {
  KeyValues kv;
  std::string last;
  std::string token;
  auto flush = [&](const std::string& tok, bool comma_continuation) {
    if (tok.empty()) bad("empty token");
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      if (!comma_continuation || last.empty()) bad("token '" + tok + "' has no '='");
      kv[last] += "," + tok;
      return;
    }
    const std::string key = tok.substr(0, eq);
    if (key.empty()) bad("empty key");
    if (kv.count(key)) bad("duplicate key '" + key + "'");
    kv[key] = tok.substr(eq + 1);
    last = key;
  };
  // Tokens after ',' may continue a vector; tokens after ';' must be keys.
  char prev_sep = ';';
  for (char c : body) {
    if (c == ';' || c == ',') {
      flush(token, prev_sep == ',');
      token.clear();
      prev_sep = c;
    } else {
      token += c;
    }
  }
  flush(token, prev_sep == ',');
  return kv;
}

ImageShape parse_shape(const std::string& s) {
  std::vector<int> dims;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, 'x');) {
    const long v = parse_int(tok, "shape");
    if (v <= 0) bad("shape dimensions must be positive");
    dims.push_back(static_cast<int>(v));
  }
  if (dims.size() != 3) bad("shape must be CxHxW");
  return {dims[0], dims[1], dims[2]};
}

std::string take(KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) bad("missing key '" + key + "'");
  std::string v = it->second;
  kv.erase(it);
  return v;
}

std::optional<std::string> take_optional(KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) return std::nullopt;
  std::string v = it->second;
  kv.erase(it);
  return v;
}

Vector to_vector(const std::vector<double>& v, std::optional<long> dim, const std::string& key) {
  const long n = dim ? *dim : static_cast<long>(v.size());
  if (n < static_cast<long>(v.size())) bad("'" + key + "' longer than dim");
  Vector out = Vector::Zero(n);
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

// Pulls the keys shared by every kind into the OracleSpec.
void take_common(KeyValues& kv, OracleSpec& spec) {
  if (auto s = take_optional(kv, "shape")) spec.shape = parse_shape(*s);
  if (auto b = take_optional(kv, "bounds")) {
    const auto v = parse_list(*b, "bounds");
    if (v.size() != 2 || !(v[0] < v[1])) bad("bounds must be lo,hi with lo < hi");
    spec.lo = v[0];
    spec.hi = v[1];
  }
}

void reject_leftovers(const KeyValues& kv) {
  if (!kv.empty()) bad("unknown key '" + kv.begin()->first + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kSchemaError, "cannot open weights file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

OracleHandle OracleSpec::open() const {
  OracleHandle handle(factory());
  if (lo && hi) handle.set_bounds(InputBounds::uniform(handle.dim(), *lo, *hi));
  return handle;
}

OracleSpec parse_oracle_spec(const std::string& text) {
  OracleSpec spec;
  spec.text = text;
  const auto colon = text.find(':');
  if (colon == std::string::npos) bad("expected kind:params, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string body = text.substr(colon + 1);
  if (body.empty()) bad("no parameters for '" + kind + "'");

  if (kind == "mlp" || kind == "extern") {
    const auto semi = body.find(';');
    const std::string head = body.substr(0, semi);
    if (semi != std::string::npos) {
      KeyValues kv = parse_keys(body.substr(semi + 1));
      take_common(kv, spec);
      reject_leftovers(kv);
    }
    if (kind == "mlp") {
      const std::string json_text = read_file(head);
      parse_weights_classifier(json_text);  // validate eagerly
      spec.factory = [json_text]() -> std::unique_ptr<Classifier> {
        return parse_weights_classifier(json_text);
      };
    } else {
      const Endpoint ep = Endpoint::parse(head);
      spec.factory = [ep]() -> std::unique_ptr<Classifier> {
        return std::make_unique<ExternalClassifier>(ep);
      };
    }
    return spec;
  }

  KeyValues kv = parse_keys(body);
  take_common(kv, spec);
  std::optional<long> dim;
  if (auto d = take_optional(kv, "dim")) {
    dim = parse_int(*d, "dim");
    if (*dim <= 0) bad("dim must be positive");
  }

  if (kind == "halfspace") {
    const Vector n = to_vector(parse_list(take(kv, "n"), "n"), dim, "n");
    const double b = parse_real(take(kv, "b"), "b");
    reject_leftovers(kv);
    spec.factory = [n, b]() -> std::unique_ptr<Classifier> {
      return std::make_unique<HalfspaceClassifier>(n, b);
    };
  } else if (kind == "sphere") {
    const Vector c = to_vector(parse_list(take(kv, "c"), "c"), dim, "c");
    const double r = parse_real(take(kv, "r"), "r");
    Label inside = 1, outside = 0;
    if (auto v = take_optional(kv, "inside")) inside = parse_int(*v, "inside");
    if (auto v = take_optional(kv, "outside")) outside = parse_int(*v, "outside");
    reject_leftovers(kv);
    spec.factory = [c, r, inside, outside]() -> std::unique_ptr<Classifier> {
      return std::make_unique<SphereClassifier>(c, r, inside, outside);
    };
  } else if (kind == "circle2d") {
    const double cx = parse_real(take(kv, "cx"), "cx");
    const double cy = parse_real(take(kv, "cy"), "cy");
    const double r = parse_real(take(kv, "r"), "r");
    reject_leftovers(kv);
    const Eigen::Index d = dim ? *dim : 2;
    spec.factory = [cx, cy, r, d]() -> std::unique_ptr<Classifier> {
      return std::make_unique<Circle2dClassifier>(cx, cy, r, d);
    };
  } else {
    bad("unknown oracle kind '" + kind + "'");
  }
  // constructor checks (radius > 0, nonzero normal) surface at parse time
  try {
    spec.factory();
  } catch (const Error& e) {
    bad(e.what());
  }
  return spec;
}

}  // namespace dce
