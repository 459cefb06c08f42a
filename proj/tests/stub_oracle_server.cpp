// Wire-protocol stub used by the external-oracle tests.
//
//   stub_oracle_server [--dim D] [--classes K] [--bad-id] [--close-after N]
//                      [--silent-after N] [--bad-handshake] [--garbage]
//                      [--tcp --port-file F]
//
// Label rule: floor(x0) mod K (nonnegative). Serves stdin/stdout by default;
// with --tcp it listens on an ephemeral loopback port, writes the port number
// to --port-file, serves one connection and exits.

#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

namespace {

struct Options {
  std::uint64_t dim = 2;
  std::int64_t classes = 2;
  bool bad_id = false;
  bool bad_handshake = false;
  bool garbage = false;
  long close_after = -1;
  long silent_after = -1;
  bool tcp = false;
  std::string port_file;
};

std::int64_t label_of(double x0, std::int64_t classes) {
  const auto f = static_cast<std::int64_t>(std::floor(x0));
  return ((f % classes) + classes) % classes;
}

void serve(std::FILE* in, std::FILE* out, const Options& o) {
  if (o.bad_handshake) {
    std::fputs("{\"protocol\":\"something-else/9\",\"dim\":2,\"classes\":2}\n", out);
  } else {
    std::fprintf(out, "{\"protocol\":\"dce-oracle/1\",\"dim\":%llu,\"classes\":%lld}\n",
                 static_cast<unsigned long long>(o.dim), static_cast<long long>(o.classes));
  }
  std::fflush(out);
  long served = 0;
  char* line = nullptr;
  std::size_t cap = 0;
  while (getline(&line, &cap, in) > 0) {
    if (o.close_after >= 0 && served >= o.close_after) break;
    if (o.silent_after >= 0 && served >= o.silent_after) continue;  // read, never answer
    nlohmann::json req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded()) break;
    const auto id = req.at("id").get<std::uint64_t>();
    const auto x = req.at("x").get<std::vector<double>>();
    if (o.garbage) {
      std::fputs("this is not json\n", out);
    } else {
      nlohmann::json resp;
      resp["id"] = o.bad_id ? id + 1 : id;
      resp["label"] = label_of(x.empty() ? 0.0 : x[0], o.classes);
      std::fputs((resp.dump() + "\n").c_str(), out);
    }
    std::fflush(out);
    ++served;
  }
  std::free(line);
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--dim") {
      o.dim = std::stoull(next());
    } else if (a == "--classes") {
      o.classes = std::stoll(next());
    } else if (a == "--bad-id") {
      o.bad_id = true;
    } else if (a == "--bad-handshake") {
      o.bad_handshake = true;
    } else if (a == "--garbage") {
      o.garbage = true;
    } else if (a == "--close-after") {
      o.close_after = std::stol(next());
    } else if (a == "--silent-after") {
      o.silent_after = std::stol(next());
    } else if (a == "--tcp") {
      o.tcp = true;
    } else if (a == "--port-file") {
      o.port_file = next();
    } else {
      std::cerr << "unknown flag " << a << "\n";
      return 2;
    }
  }

  if (!o.tcp) {
    serve(stdin, stdout, o);
    return 0;
  }

  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  int yes = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(srv, 1) != 0) {
    std::perror("bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  {
    // write-then-rename so readers never see a partial file
    const std::string tmp = o.port_file + ".tmp";
    std::ofstream(tmp) << ntohs(addr.sin_port) << "\n";
    std::rename(tmp.c_str(), o.port_file.c_str());
  }
  const int fd = ::accept(srv, nullptr, nullptr);
  ::close(srv);  // one connection only: reconnects are refused
  if (fd < 0) return 1;
  std::FILE* in = ::fdopen(fd, "r");
  std::FILE* out = ::fdopen(::dup(fd), "w");
  serve(in, out, o);
  std::fclose(out);
  std::fclose(in);
  return 0;
}
