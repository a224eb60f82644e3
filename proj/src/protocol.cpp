#include "regalloc/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>

#include <spdlog/spdlog.h>

#include "regalloc/baselines.hpp"

namespace regalloc {

std::string encode_frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw ProtocolError("frame of " + std::to_string(body.size()) + " bytes is too large");
  auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
  out.append(body);
  return out;
}

std::optional<std::string> decode_frame(std::string& buffer) {
  if (buffer.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer[i]);
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " exceeds the limit");
  if (buffer.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string body = buffer.substr(4, n);
  buffer.erase(0, 4 + std::size_t{n});
  return body;
}

namespace {

// Reads up to `n` bytes; returns the count read before end of stream.
std::size_t read_fully(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::read(fd, buf + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

void ignore_sigpipe() {
  static const bool once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

FdTransport::FdTransport(int in_fd, int out_fd, bool owns) : in_(in_fd), out_(out_fd), owns_(owns) { ignore_sigpipe(); }

FdTransport::~FdTransport() { close(); }

void FdTransport::close() {
  if (!owns_) return;
  owns_ = false;
  if (in_ >= 0) ::close(in_);
  if (out_ >= 0 && out_ != in_) ::close(out_);
  in_ = out_ = -1;
}

std::optional<std::string> FdTransport::read_frame() {
  char hdr[4];
  std::size_t got = read_fully(in_, hdr, 4);
  if (got == 0) return std::nullopt;
  if (got < 4) throw ProtocolError("truncated frame header");
  std::uint32_t n = 0;
  for (char c : hdr) n = (n << 8) | static_cast<unsigned char>(c);
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " exceeds the limit");
  std::string body(n, '\0');
  if (read_fully(in_, body.data(), n) < n) throw ProtocolError("truncated frame body");
  return body;
}

void FdTransport::write_frame(std::string_view body) {
  std::string frame = encode_frame(body);
  std::size_t off = 0;
  while (off < frame.size()) {
    ssize_t w = ::write(out_, frame.data() + off, frame.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(w);
  }
}

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string service = std::to_string(port);
  if (int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw ProtocolError("cannot resolve " + host + ": " + gai_strerror(rc));
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdTransport>(fd, fd, true);
}

std::pair<std::string, std::uint16_t> parse_host_port(std::string_view s) {
  auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size())
    throw Error("expected HOST:PORT, got '" + std::string(s) + "'");
  std::string port(s.substr(colon + 1));
  if (!std::all_of(port.begin(), port.end(), [](unsigned char c) { return std::isdigit(c); }) || port.size() > 5 ||
      std::stoul(port) > 65535)
    throw Error("bad port in '" + std::string(s) + "'");
  return {std::string(s.substr(0, colon)), static_cast<std::uint16_t>(std::stoul(port))};
}

// ---------------------------------------------------------------------------
// Server session

namespace {

class Session {
 public:
  Session(Transport& t, const ServerConfig& cfg, std::uint64_t id) : t_(t), cfg_(cfg), id_(id) {}

  void run() {
    while (true) {
      std::optional<std::string> frame;
      try {
        frame = t_.read_frame();
      } catch (const ProtocolError& e) {
        spdlog::debug("session {}: {}", id_, e.what());
        return;
      }
      if (!frame) return;
      Json m = Json::parse(*frame, nullptr, false);
      if (m.is_discarded() || !m.is_object() || !m.contains("type") || !m["type"].is_string() || !m.contains("seq") ||
          !m["seq"].is_number_unsigned()) {
        error("malformed", "expected a JSON object with string 'type' and unsigned 'seq'", 0);
        return;
      }
      std::uint64_t seq = m["seq"].get<std::uint64_t>();
      if (seq <= last_in_) {
        error("stale", "seq " + std::to_string(seq) + " is not after " + std::to_string(last_in_), seq);
        continue;
      }
      last_in_ = seq;
      const std::string type = m["type"].get<std::string>();
      try {
        if (type == "hello") {
          if (m.contains("version") && m["version"] != kProtocolVersion) {
            error("version", "server speaks version " + std::to_string(kProtocolVersion), seq);
            return;
          }
          send({{"type", "hello"}, {"version", kProtocolVersion}, {"role", "environment"}, {"machine", cfg_.machine}},
               seq);
        } else if (type == "start_episode") {
          start(m, seq);
        } else if (type == "action") {
          if (!m.contains("action") || !m["action"].is_string()) {
            error("malformed", "action needs a string 'action'", seq);
            return;
          }
          act(m["action"].get<std::string>(), seq);
        } else if (type == "bye") {
          return;
        } else {
          error("malformed", "unknown message type '" + type + "'", seq);
          return;
        }
      } catch (const Json::exception& e) {
        error("malformed", e.what(), seq);
        return;
      } catch (const ProtocolError&) {
        return;
      }
    }
  }

 private:
  void send(Json m, std::uint64_t ack) {
    m["session"] = id_;
    m["seq"] = ++out_seq_;
    m["ack"] = ack;
    t_.write_frame(m.dump());
  }

  void error(const std::string& code, const std::string& message, std::uint64_t ack) {
    try {
      send({{"type", "error"}, {"code", code}, {"message", message}}, ack);
    } catch (const ProtocolError&) {
    }
  }

  void start(const Json& m, std::uint64_t seq) {
    try {
      std::string machine = m.value("machine", cfg_.machine);
      md_ = std::make_unique<MachineDescription>(resolve_machine(machine));
      EnvConfig config = m.contains("config") ? m["config"].get<EnvConfig>() : cfg_.env;
      MachineFunction fn;
      if (m.contains("function")) {
        fn = parse_function(m["function"].get<std::string>(), md_.get());
      } else if (m.contains("corpus_index")) {
        auto i = m["corpus_index"].get<std::size_t>();
        if (i >= cfg_.corpus.size()) throw Error("corpus_index " + std::to_string(i) + " out of range");
        fn = cfg_.corpus[i];
      } else if (m.contains("corpus_seed")) {
        auto s = m["corpus_seed"].get<std::uint64_t>();
        if (s < cfg_.seed_lo || s > cfg_.seed_hi) throw Error("corpus_seed outside the served range");
        GenParams gen = m.contains("gen") ? m["gen"].get<GenParams>() : cfg_.gen;
        fn = generate_random_function(s, gen, md_.get());
      } else {
        throw Error("start_episode needs 'function', 'corpus_index' or 'corpus_seed'");
      }
      original_ = fn;
      env_ = std::make_unique<Environment>(*md_, config, cfg_.vocab);
      total_ = 0;
      ResetStatus status = env_->reset(fn);
      if (status == ResetStatus::Ready) {
        active_ = true;
        send({{"type", "observation"}, {"status", reset_status_name(status)}, {"observation", env_->observation()}},
             seq);
        return;
      }
      active_ = false;
      Json result{{"function", print_function(original_)}, {"total_reward", 0.0}};
      if (original_.has_vregs()) {
        GreedyResult g = greedy_allocate(original_, *md_);
        result["baseline_cost"] = g.cost;
        result["color_map"] = g.out.full_map;
        result["physical"] = print_function(g.out.physical_fn);
      } else {
        result["baseline_cost"] = estimate_throughput(*md_, original_);
        result["physical"] = print_function(original_);
      }
      send({{"type", "episode_done"}, {"status", reset_status_name(status)}, {"result", result}}, seq);
    } catch (const ProtocolError&) {
      throw;
    } catch (const Json::exception&) {
      throw;
    } catch (const Error& e) {
      active_ = false;
      error("invalid_request", e.what(), seq);
    }
  }

  void act(const std::string& action, std::uint64_t seq) {
    if (!active_) {
      error("no_episode", "no episode in progress", seq);
      return;
    }
    StepResult r;
    try {
      r = env_->step(action);
    } catch (const OffMaskError& e) {
      error("off_mask", e.what(), seq);
      send({{"type", "observation"}, {"observation", env_->observation()}}, seq);
      return;
    }
    total_ += r.reward;
    if (r.info.graph_update) {
      send({{"type", "graph_update"},
            {"agent", agent_name(r.agent)},
            {"reward", r.reward},
            {"update", *r.info.graph_update}},
           seq);
      send({{"type", "observation"}, {"observation", env_->observation()}}, seq);
      return;
    }
    Json step{{"agent", agent_name(r.agent)}, {"reward", r.reward}, {"info", r.info}};
    if (!r.done) {
      step["type"] = "observation";
      step["observation"] = env_->observation();
      send(std::move(step), seq);
      return;
    }
    active_ = false;
    try {
      FinalizeResult f = env_->finalize();
      step["type"] = "episode_done";
      step["status"] = reset_status_name(ResetStatus::Ready);
      step["result"] = Json{{"function", print_function(original_)},
                            {"total_reward", total_},
                            {"global_reward", f.global_reward},
                            {"rl_cost", f.rl_cost},
                            {"baseline_cost", f.baseline_cost},
                            {"color_map", f.out.full_map},
                            {"spilled", f.out.spilled},
                            {"physical", print_function(f.out.physical_fn)}};
      send(std::move(step), seq);
    } catch (const ProtocolError&) {
      throw;
    } catch (const Error& e) {
      error("internal", e.what(), seq);
    }
  }

  Transport& t_;
  const ServerConfig& cfg_;
  std::uint64_t id_;
  std::uint64_t out_seq_ = 0;
  std::uint64_t last_in_ = 0;
  std::unique_ptr<MachineDescription> md_;
  std::unique_ptr<Environment> env_;
  MachineFunction original_;
  bool active_ = false;
  double total_ = 0;
};

}  // namespace

void serve_session(Transport& t, const ServerConfig& config, std::uint64_t session_id) {
  spdlog::debug("session {} opened", session_id);
  Session(t, config, session_id).run();
  spdlog::debug("session {} closed", session_id);
}

TcpServer::TcpServer(ServerConfig config, std::uint16_t port, const std::string& bind)
    : config_(std::move(config)) {
  ignore_sigpipe();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ProtocolError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, bind.c_str(), &addr.sin_addr) != 1) throw ProtocolError("bad bind address '" + bind + "'");
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw ProtocolError("cannot listen on " + bind + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  for (auto& t : sessions_)
    if (t.joinable()) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run() {
  while (!stopping_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (stopping_) break;
      spdlog::warn("accept failed: {}", std::strerror(errno));
      continue;
    }
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    session_fds_.push_back(fd);
    std::uint64_t id = next_session_++;
    sessions_.emplace_back([this, fd, id] {
      FdTransport t(fd, fd, true);
      try {
        serve_session(t, config_, id);
      } catch (const std::exception& e) {
        spdlog::warn("session {} aborted: {}", id, e.what());
      }
      std::lock_guard inner(mu_);
      session_fds_.erase(std::find(session_fds_.begin(), session_fds_.end(), fd));
    });
  }
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  std::lock_guard lock(mu_);
  for (int fd : session_fds_) ::shutdown(fd, SHUT_RDWR);
}

// ---------------------------------------------------------------------------
// Client side

EnvClient::EnvClient(std::unique_ptr<Transport> t) : t_(std::move(t)) {}

Json EnvClient::send(Json msg) {
  msg["seq"] = ++seq_;
  t_->write_frame(msg.dump());
  return msg;
}

Json EnvClient::receive() {
  auto frame = t_->read_frame();
  if (!frame) throw ProtocolError("connection closed by peer");
  Json m = Json::parse(*frame, nullptr, false);
  if (m.is_discarded() || !m.is_object() || !m.contains("type")) throw ProtocolError("malformed message from peer");
  return m;
}

Json EnvClient::hello() {
  send({{"type", "hello"}, {"version", kProtocolVersion}, {"role", "agent"}});
  Json m = receive();
  if (m["type"] != "hello") throw ProtocolError("expected hello, got " + m.dump());
  session_ = m.value("session", std::uint64_t{0});
  return m;
}

Json start_with_function(const MachineFunction& fn, const std::string& machine, const EnvConfig& config) {
  return {{"type", "start_episode"}, {"function", print_function(fn)}, {"machine", machine}, {"config", config}};
}

Json start_with_seed(std::uint64_t corpus_seed, const std::string& machine, const EnvConfig& config) {
  return {{"type", "start_episode"}, {"corpus_seed", corpus_seed}, {"machine", machine}, {"config", config}};
}

Transcript run_remote_episode(EnvClient& client, const Json& start, const Policy& policy,
                              const std::string& policy_name, std::uint64_t seed) {
  Transcript t;
  t.machine = start.value("machine", std::string{});
  t.config = start.contains("config") ? start["config"].get<EnvConfig>() : EnvConfig{};
  t.policy = policy_name;
  t.seed = seed;
  client.send(start);
  std::string pending;
  auto record = [&](const Json& m, StepInfo info) {
    StepRecord s{parse_agent(m.at("agent").get<std::string>()), pending, m.at("reward").get<double>(), std::move(info)};
    t.total_reward += s.reward;
    t.steps.push_back(std::move(s));
  };
  Json m = client.receive();
  while (true) {
    const std::string type = m.at("type").get<std::string>();
    if (type == "error") throw ProtocolError(m.value("code", "") + ": " + m.value("message", ""));
    if (type == "graph_update") {
      StepInfo info;
      info.graph_update = m.at("update").get<GraphUpdate>();
      record(m, std::move(info));
      m = client.receive();
      continue;
    }
    if (m.contains("reward")) record(m, m.at("info").get<StepInfo>());
    if (type == "episode_done") {
      t.status = parse_reset_status(m.at("status").get<std::string>());
      const Json& r = m.at("result");
      t.function = r.at("function").get<std::string>();
      if (t.status == ResetStatus::Ready) {
        t.global_reward = r.at("global_reward").get<double>();
        t.rl_cost = r.at("rl_cost").get<double>();
        t.baseline_cost = r.at("baseline_cost").get<double>();
        t.color_map = r.at("color_map").get<ColorMap>();
      }
      return t;
    }
    if (type != "observation") throw ProtocolError("unexpected message type '" + type + "'");
    Observation obs = m.at("observation").get<Observation>();
    pending = policy(obs);
    client.send({{"type", "action"}, {"action", pending}});
    m = client.receive();
  }
}

Policy remote_policy(const std::string& host, std::uint16_t port) {
  struct State {
    std::unique_ptr<EnvClient> client;
    std::string host;
    std::uint16_t port;
  };
  auto st = std::make_shared<State>(State{nullptr, host, port});
  return [st](const Observation& o) -> std::string {
    if (!st->client) {
      st->client = std::make_unique<EnvClient>(connect_tcp(st->host, st->port));
      st->client->send({{"type", "hello"}, {"version", kProtocolVersion}, {"role", "environment"}});
      Json h = st->client->receive();
      if (h["type"] != "hello") throw ProtocolError("policy peer did not answer hello");
    }
    st->client->send({{"type", "observation"}, {"observation", o}});
    Json m = st->client->receive();
    if (m["type"] != "action" || !m.contains("action") || !m["action"].is_string())
      throw ProtocolError("policy peer sent " + m.dump());
    return m["action"].get<std::string>();
  };
}

void serve_policy(Transport& t, const Policy& policy) {
  std::uint64_t seq = 0;
  auto reply = [&](Json m) {
    m["seq"] = ++seq;
    t.write_frame(m.dump());
  };
  while (auto frame = t.read_frame()) {
    Json m = Json::parse(*frame, nullptr, false);
    if (m.is_discarded() || !m.is_object() || !m.contains("type")) {
      reply({{"type", "error"}, {"code", "malformed"}, {"message", "expected a JSON object"}});
      return;
    }
    if (m["type"] == "hello") {
      reply({{"type", "hello"}, {"version", kProtocolVersion}, {"role", "agent"}});
    } else if (m["type"] == "observation") {
      reply({{"type", "action"}, {"action", policy(m.at("observation").get<Observation>())}});
    } else if (m["type"] == "bye") {
      return;
    } else {
      reply({{"type", "error"}, {"code", "malformed"}, {"message", "unexpected message"}});
      return;
    }
  }
}

}  // namespace regalloc
