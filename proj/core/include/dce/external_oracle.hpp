#ifndef DCE_EXTERNAL_ORACLE_HPP
#define DCE_EXTERNAL_ORACLE_HPP

#include "dce/oracles.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace dce {

// Line-delimited JSON over a byte stream:
//   server hello:  {"protocol":"dce-oracle/1","dim":D,"classes":K}
//   request:       {"id":N,"x":[...]}
//   response:      {"id":N,"label":L}

inline constexpr const char* kWireProtocol = "dce-oracle/1";

struct Endpoint {
  enum class Kind { kTcp, kCommand };
  Kind kind = Kind::kTcp;
  std::string host;
  std::uint16_t port = 0;
  std::vector<std::string> argv;

  /// "tcp:host:port" or "cmd:<argv>" (argv split on whitespace).
  static Endpoint parse(const std::string& text);
};

struct ExternalOptions {
  std::chrono::milliseconds timeout{30000};
  /// Transport failures are retried this many times (reconnecting, or
  /// respawning the subprocess) before RemoteFailure.
  int retries = 3;

  /// Defaults with DCE_ORACLE_TIMEOUT_MS applied when set.
  static ExternalOptions from_env();
};

class Connection;

/// Remote classifier. Malformed or mismatched responses raise ProtocolError
/// immediately; I/O failures are retried.
class ExternalClassifier : public Classifier {
 public:
  explicit ExternalClassifier(Endpoint endpoint,
                              ExternalOptions options = ExternalOptions::from_env());
  ~ExternalClassifier() override;

  Label label(const Vector& x) override;
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(dim_); }
  std::uint64_t classes() const { return classes_; }

 private:
  void connect();

  Endpoint endpoint_;
  ExternalOptions options_;
  std::unique_ptr<Connection> conn_;
  std::uint64_t dim_ = 0;
  std::uint64_t classes_ = 0;
  std::uint64_t next_id_ = 0;
};

OracleHandle connect_external(const Endpoint& endpoint,
                              ExternalOptions options = ExternalOptions::from_env());

}  // namespace dce

#endif  // DCE_EXTERNAL_ORACLE_HPP
