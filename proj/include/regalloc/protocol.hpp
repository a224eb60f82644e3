#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "regalloc/error.hpp"
#include "regalloc/serialize.hpp"
#include "regalloc/transcript.hpp"

namespace regalloc {

// Frames are a 4-byte big-endian length followed by a UTF-8 JSON object.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;
inline constexpr int kProtocolVersion = 1;

class ProtocolError : public Error {
 public:
  using Error::Error;
};

std::string encode_frame(std::string_view body);
/// Pops one complete frame off the front of `buffer`; nullopt if incomplete.
/// Throws ProtocolError for a length above kMaxFrameBytes.
std::optional<std::string> decode_frame(std::string& buffer);

class Transport {
 public:
  virtual ~Transport() = default;
  /// nullopt on a clean end of stream between frames; ProtocolError on a
  /// truncated or oversized frame.
  virtual std::optional<std::string> read_frame() = 0;
  virtual void write_frame(std::string_view body) = 0;
  virtual void close() {}
};

/// Blocking transport over a pair of file descriptors (a socket, or stdin
/// and stdout).
class FdTransport : public Transport {
 public:
  FdTransport(int in_fd, int out_fd, bool owns);
  ~FdTransport() override;
  std::optional<std::string> read_frame() override;
  void write_frame(std::string_view body) override;
  void close() override;

 private:
  int in_, out_;
  bool owns_;
};

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port);

struct ServerConfig {
  std::string machine = "x86like";
  EnvConfig env;
  const EmbeddingVocabulary* vocab = nullptr;
  std::vector<MachineFunction> corpus;  // addressable by "corpus_index"
  GenParams gen;                        // for "corpus_seed"
  std::uint64_t seed_lo = 0;            // accepted corpus_seed range, inclusive
  std::uint64_t seed_hi = UINT64_MAX;
};

/// Serves one session until the peer closes or sends malformed input.
/// Client messages carry a strictly increasing "seq"; a stale one gets an
/// Error{stale} and is ignored, an off-mask action gets Error{off_mask} and
/// the current observation again.
void serve_session(Transport& t, const ServerConfig& config, std::uint64_t session_id);

/// Accept loop on 127.0.0.1 (or `bind`), one thread per session.
class TcpServer {
 public:
  TcpServer(ServerConfig config, std::uint16_t port = 0, const std::string& bind = "127.0.0.1");
  ~TcpServer();
  std::uint16_t port() const { return port_; }
  void run();   // blocks until stop()
  void stop();

 private:
  ServerConfig config_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> next_session_{1};
  std::mutex mu_;
  std::vector<std::thread> sessions_;
  std::vector<int> session_fds_;
};

/// Agent side of a session.
class EnvClient {
 public:
  explicit EnvClient(std::unique_ptr<Transport> t);
  Json hello();
  Json send(Json msg);  // stamps "seq", returns the message as sent
  Json receive();       // throws ProtocolError on end of stream
  void send_raw(const Json& msg) { t_->write_frame(msg.dump()); }
  std::uint64_t next_seq() const { return seq_ + 1; }
  std::uint64_t session() const { return session_; }

 private:
  std::unique_ptr<Transport> t_;
  std::uint64_t seq_ = 0;
  std::uint64_t session_ = 0;
};

/// StartEpisode payloads.
Json start_with_function(const MachineFunction& fn, const std::string& machine, const EnvConfig& config);
Json start_with_seed(std::uint64_t corpus_seed, const std::string& machine, const EnvConfig& config);

/// Drives one episode over `client` and rebuilds the transcript from the
/// messages received.
Transcript run_remote_episode(EnvClient& client, const Json& start, const Policy& policy,
                              const std::string& policy_name, std::uint64_t seed);

/// A policy whose decisions come from a peer: each observation is sent as
/// an Observation message and answered by an Action message.
Policy remote_policy(const std::string& host, std::uint16_t port);

/// Policy side of remote_policy: answers Observation messages until the peer
/// closes.
void serve_policy(Transport& t, const Policy& policy);

/// "HOST:PORT" -> (host, port). Throws Error on malformed input.
std::pair<std::string, std::uint16_t> parse_host_port(std::string_view s);

}  // namespace regalloc
