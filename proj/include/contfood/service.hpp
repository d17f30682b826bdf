#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "contfood/checkpoint.hpp"
#include "contfood/continual.hpp"
#include "contfood/nnet.hpp"

namespace httplib {
class Server;
}

namespace contfood {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Initial checkpoint. A checkpoint already persisted in data_dir wins so a
  /// restarted server resumes where it stopped.
  std::string checkpoint_path;
  std::string data_dir = "contfood-data";
  double tau = kDefaultNoveltyMargin;
  IncrementConfig increment;
  /// Labeled CSV/JSONL used as the old test set in forgetting reports; when
  /// empty, data_dir/old_test.csv is tried, then the replay buffer, then the
  /// staged items themselves.
  std::string old_test_path;
  /// Optional directory served at / (the labeling console build).
  std::string static_dir;
  /// Read/write timeout for a request, which bounds a synchronous increment.
  int request_timeout_seconds = 600;

  /// Applies CONTFOOD_ADDR (host:port), CONTFOOD_DATA_DIR and CONTFOOD_TAU.
  void apply_environment();
};

enum class QueueStatus { pending, labeled };

struct QueueEntry {
  std::uint64_t id = 0;
  std::string item_name;
  double probability = 0.5;
  std::string flagged_reason;
  std::string enqueued_at;
  QueueStatus status = QueueStatus::pending;

  nlohmann::json to_json() const;
  static QueueEntry from_json(const nlohmann::json& j);
};

struct LabelEvent {
  std::uint64_t seq = 0;  // position in the label log
  std::optional<std::uint64_t> id;
  std::string item_name;
  Label label = Label::NonVeg;
  std::string source = "human";
  std::string timestamp;

  nlohmann::json to_json() const;
  static LabelEvent from_json(const nlohmann::json& j);
};

/// Status code plus JSON body; errors carry {error, message}.
struct Response {
  int status = 200;
  nlohmann::json body;
};

/// The classify / queue / label / increment loop over an immutable serving
/// snapshot. Readers take a shared_ptr copy of the snapshot; mutations are
/// serialized, and at most one increment runs at a time.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response classify(const nlohmann::json& body);
  Response queue() const;
  Response label(const nlohmann::json& body);
  Response run_increment(const nlohmann::json& body);
  Response model() const;
  Response history() const;

  /// Routes a request the way the HTTP server does (used by tests and the server).
  Response handle(const std::string& method, const std::string& path, const std::string& body);

  std::shared_ptr<const Checkpoint> snapshot() const;
  std::size_t staged() const;

  /// Blocks serving HTTP on options.host:options.port.
  void listen();
  /// Binds (port 0 picks a free port), serves on a background thread and
  /// returns the bound port.
  int start();
  void stop();

 private:
  void load_state();
  void persist_queue() const;
  Response increment_locked(const nlohmann::json& body);
  LabeledMatrix old_test_set(const Checkpoint& ckpt, const Corpus& staged) const;
  void build_server();

  ServiceOptions options_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Checkpoint> snapshot_;

  mutable std::mutex write_mutex_;
  std::vector<QueueEntry> entries_;
  std::map<std::string, std::uint64_t> pending_by_name_;
  std::uint64_t next_id_ = 1;
  std::uint64_t next_seq_ = 0;
  std::vector<LabelEvent> staging_;
  std::vector<EpochRecord> training_history_;
  std::vector<nlohmann::json> reports_;

  std::mutex increment_mutex_;
  std::unique_ptr<ReplayBuffer> buffer_;
  std::optional<Corpus> old_test_;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace contfood
