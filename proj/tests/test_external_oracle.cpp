#include "dce/attacks.hpp"
#include "dce/errors.hpp"
#include "dce/external_oracle.hpp"
#include "dce/oracle_spec.hpp"
#include "dce/trace_io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

extern char** environ;

namespace dce {
namespace {

using namespace std::chrono_literals;

const std::string kStub = DCE_STUB_SERVER;

Endpoint stdio_stub(const std::string& extra = "", int dim = 2) {
  return Endpoint::parse("cmd:" + kStub + " --dim " + std::to_string(dim) + " " + extra);
}

ExternalOptions quick(int timeout_ms = 2000) {
  ExternalOptions o;
  o.timeout = std::chrono::milliseconds(timeout_ms);
  return o;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no dce::Error thrown";
  return ErrorCode::kEmptyInput;
}

/// Stub listening on loopback TCP, killed on destruction.
class TcpStub {
 public:
  explicit TcpStub(std::vector<std::string> extra, int dim = 2) {
    const auto dir = test::scratch_dir("tcpstub" + std::to_string(counter_++));
    port_file_ = (dir / "port").string();
    std::vector<std::string> args{kStub, "--tcp", "--port-file", port_file_, "--dim",
                                  std::to_string(dim)};
    args.insert(args.end(), extra.begin(), extra.end());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    if (posix_spawn(&pid_, argv[0], nullptr, nullptr, argv.data(), environ) != 0) {
      throw std::runtime_error("spawn failed");
    }
    for (int i = 0; i < 500; ++i) {
      std::ifstream in(port_file_);
      if (in >> port_) return;
      std::this_thread::sleep_for(10ms);
    }
    throw std::runtime_error("stub did not publish a port");
  }
  ~TcpStub() {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  Endpoint endpoint() const {
    return Endpoint::parse("tcp:127.0.0.1:" + std::to_string(port_));
  }

 private:
  static inline int counter_ = 0;
  pid_t pid_ = 0;
  int port_ = 0;
  std::string port_file_;
};

TEST(Endpoint, Parse) {
  const Endpoint t = Endpoint::parse("tcp:localhost:9000");
  EXPECT_EQ(t.kind, Endpoint::Kind::kTcp);
  EXPECT_EQ(t.host, "localhost");
  EXPECT_EQ(t.port, 9000);
  const Endpoint c = Endpoint::parse("cmd:python3 -m bridge --stdio");
  EXPECT_EQ(c.kind, Endpoint::Kind::kCommand);
  EXPECT_EQ(c.argv, (std::vector<std::string>{"python3", "-m", "bridge", "--stdio"}));
  for (const char* bad : {"tcp:host", "tcp:host:notaport", "tcp:host:70000", "cmd:", "udp:x:1", ""}) {
    EXPECT_EQ(code_of([&] { Endpoint::parse(bad); }), ErrorCode::kBadConfig) << bad;
  }
}

TEST(ExternalOptions, TimeoutFromEnvironment) {
  ::setenv("DCE_ORACLE_TIMEOUT_MS", "250", 1);
  EXPECT_EQ(ExternalOptions::from_env().timeout, 250ms);
  ::setenv("DCE_ORACLE_TIMEOUT_MS", "soon", 1);
  EXPECT_THROW(ExternalOptions::from_env(), Error);
  ::unsetenv("DCE_ORACLE_TIMEOUT_MS");
  EXPECT_EQ(ExternalOptions::from_env().timeout, 30000ms);
  EXPECT_EQ(ExternalOptions::from_env().retries, 3);
}

TEST(WireProtocol, ExactHandshakeLine) {
  std::FILE* p = ::popen((kStub + " --dim 7 --classes 10 </dev/null").c_str(), "r");
  ASSERT_NE(p, nullptr);
  char buf[256] = {};
  ASSERT_NE(std::fgets(buf, sizeof buf, p), nullptr);
  ::pclose(p);
  EXPECT_STREQ(buf, "{\"protocol\":\"dce-oracle/1\",\"dim\":7,\"classes\":10}\n");
}

TEST(ExternalClassifier, StdioStubFloorModTwo) {
  OracleHandle h = connect_external(stdio_stub(), quick());
  EXPECT_EQ(h.dim(), 2);
  EXPECT_EQ(h.classify(Vector{{1.0, 0.0}}), 1);
  EXPECT_EQ(h.classify(Vector{{0.5, 0.0}}), 0);
  EXPECT_EQ(h.classify(Vector{{-0.5, 3.0}}), 1);
  EXPECT_EQ(h.queries(), 3u);
  EXPECT_EQ(dynamic_cast<ExternalClassifier&>(h.classifier()).classes(), 2u);
}

TEST(ExternalClassifier, ConformanceScriptOfFiftyRequests) {
  std::uint64_t calls = 0;
  OracleHandle h = test::counted(std::make_unique<ExternalClassifier>(stdio_stub("--classes 3", 3), quick()),
                                 &calls);
  std::mt19937_64 g(50);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 50; ++i) {
    const Vector x = Vector{{u(g), u(g), u(g)}};
    const auto f = static_cast<Label>(std::floor(x(0)));
    ASSERT_EQ(h.classify(x), ((f % 3) + 3) % 3) << "request " << i;
  }
  EXPECT_EQ(h.queries(), 50u);
  EXPECT_EQ(calls, 50u);
}

TEST(ExternalClassifier, MismatchedIdIsProtocolError) {
  OracleHandle h = connect_external(stdio_stub("--bad-id"), quick());
  EXPECT_EQ(code_of([&] { h.classify(Vector{{1.0, 0.0}}); }), ErrorCode::kProtocolError);
}

TEST(ExternalClassifier, MalformedResponseIsProtocolError) {
  OracleHandle h = connect_external(stdio_stub("--garbage"), quick());
  EXPECT_EQ(code_of([&] { h.classify(Vector{{1.0, 0.0}}); }), ErrorCode::kProtocolError);
}

TEST(ExternalClassifier, WrongProtocolInHandshake) {
  EXPECT_EQ(code_of([&] { connect_external(stdio_stub("--bad-handshake"), quick()); }),
            ErrorCode::kProtocolError);
}

TEST(ExternalClassifier, WrongInputDimension) {
  OracleHandle h = connect_external(stdio_stub(), quick());
  EXPECT_EQ(code_of([&] { h.classify(Vector::Zero(5)); }), ErrorCode::kDimensionMismatch);
}

TEST(ExternalClassifier, SubprocessIsRespawnedAfterExit) {
  // the child exits after every 3 answers; retries respawn it transparently
  OracleHandle h = connect_external(stdio_stub("--close-after 3"), quick());
  for (int i = 0; i < 10; ++i) {
    ASSERT_EQ(h.classify(Vector{{1.0 + i % 2, 0.0}}), i % 2 == 0 ? 1 : 0) << i;
  }
  EXPECT_EQ(h.queries(), 10u);
}

TEST(ExternalClassifier, MissingCommandIsRemoteFailure) {
  EXPECT_EQ(code_of([] {
              connect_external(Endpoint::parse("cmd:/nonexistent/oracle-server"), quick(500));
            }),
            ErrorCode::kRemoteFailure);
}

TEST(ExternalClassifier, SilentServerTimesOut) {
  ::setenv("DCE_ORACLE_TIMEOUT_MS", "100", 1);
  const ExternalOptions opts = ExternalOptions::from_env();
  ::unsetenv("DCE_ORACLE_TIMEOUT_MS");
  OracleHandle h = connect_external(stdio_stub("--silent-after 0"), opts);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { h.classify(Vector{{1.0, 0.0}}); }), ErrorCode::kRemoteFailure);
  const auto took = std::chrono::steady_clock::now() - start;
  EXPECT_GE(took, 400ms);  // 1 try + 3 retries, 100 ms each at least
  EXPECT_LT(took, 10s);
}

TEST(ExternalClassifier, TcpStub) {
  TcpStub stub({});
  OracleHandle h = connect_external(stub.endpoint(), quick());
  EXPECT_EQ(h.classify(Vector{{1.0, 0.0}}), 1);
  EXPECT_EQ(h.classify(Vector{{2.5, 0.0}}), 0);
}

TEST(ExternalClassifier, UnreachableTcpIsRemoteFailure) {
  int port = 0;
  {
    TcpStub stub({});  // grab a port that then goes away
    port = stub.endpoint().port;
  }
  EXPECT_EQ(code_of([&] {
              connect_external(Endpoint::parse("tcp:127.0.0.1:" + std::to_string(port)), quick(500));
            }),
            ErrorCode::kRemoteFailure);
}

// --- attacks against the stub --------------------------------------------

Label floor_mod_two(const Vector& x) {
  const auto f = static_cast<Label>(std::floor(x(0)));
  return ((f % 2) + 2) % 2;
}

std::string trace_body(const AttackTrace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

TEST(ExternalAttack, StubMatchesInProcessOracle) {
  const int dim = 4;
  const Vector xs = Vector{{0.5, 0.1, -0.2, 0.3}};
  const Vector xt = Vector{{1.5, 0.4, 0.2, -0.1}};
  for (Algo algo : {Algo::kDce, Algo::kCdba}) {
    AttackConfig cfg;
    cfg.algo = algo;
    cfg.max_iterations = 4;
    cfg.n0 = 10;
    cfg.seed = 3;
    OracleHandle local(std::make_unique<FunctionClassifier>(dim, floor_mod_two));
    OracleHandle remote = connect_external(stdio_stub("", dim), quick());
    const AttackTrace a = run_attack(local, xs, xt, cfg);
    const AttackTrace b = run_attack(remote, xs, xt, cfg);
    EXPECT_EQ(trace_body(a), trace_body(b));
    EXPECT_EQ(local.queries(), remote.queries());
    EXPECT_TRUE(b.error.empty());
  }
}

TEST(ExternalAttack, ServerClosedMidAttackFlagsPartial) {
  TcpStub stub({"--close-after", "60"}, 4);
  OracleHandle h = connect_external(stub.endpoint(), quick(1000));
  AttackConfig cfg;
  cfg.max_iterations = 10;
  cfg.n0 = 10;
  const AttackTrace t =
      run_attack(h, Vector{{0.5, 0.0, 0.0, 0.0}}, Vector{{1.5, 0.0, 0.0, 0.0}}, cfg);
  EXPECT_TRUE(t.partial);
  EXPECT_NE(t.error.find("RemoteFailure"), std::string::npos) << t.error;
  EXPECT_GE(t.final_point.x(0), 1.0);
  EXPECT_LT(t.final_point.x(0), 2.0);
  EXPECT_EQ(t.records.back().queries, h.queries());
}

TEST(ExternalAttack, OracleSpecOpensStub) {
  OracleHandle h = parse_oracle_spec("extern:cmd:" + kStub + " --dim 3").open();
  EXPECT_EQ(h.dim(), 3);
  EXPECT_EQ(h.classify(Vector{{1.2, 0.0, 0.0}}), 1);
}

}  // namespace
}  // namespace dce
