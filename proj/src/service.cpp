#include "contfood/service.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <httplib.h>

#include "contfood/codec.hpp"
#include "contfood/error.hpp"
#include "contfood/rng.hpp"

namespace contfood {

namespace fs = std::filesystem;

namespace {

Response error_response(int status, std::string code, std::string message) {
  return {status, {{"error", std::move(code)}, {"message", std::move(message)}}};
}

std::string status_token(QueueStatus s) { return s == QueueStatus::pending ? "pending" : "labeled"; }

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(codec::read_file(path.string()));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void append_line(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to " + path.string());
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

/// `name` in data_dir, else next to the initial checkpoint, else empty.
fs::path locate(const ServiceOptions& o, const std::string& name) {
  const fs::path own = fs::path(o.data_dir) / name;
  if (fs::exists(own)) return own;
  if (!o.checkpoint_path.empty()) {
    const fs::path sibling = fs::path(o.checkpoint_path).parent_path() / name;
    if (fs::exists(sibling)) return sibling;
  }
  return {};
}

}  // namespace

void ServiceOptions::apply_environment() {
  if (const char* addr = std::getenv("CONTFOOD_ADDR"); addr && *addr) {
    const std::string a(addr);
    const auto colon = a.rfind(':');
    try {
      if (colon == std::string::npos) {
        port = std::stoi(a);
      } else {
        if (colon > 0) host = a.substr(0, colon);
        port = std::stoi(a.substr(colon + 1));
      }
    } catch (const std::exception&) {
      throw UsageError("CONTFOOD_ADDR must be host:port, got \"" + a + "\"");
    }
  }
  if (const char* dir = std::getenv("CONTFOOD_DATA_DIR"); dir && *dir) data_dir = dir;
  if (const char* tau_env = std::getenv("CONTFOOD_TAU"); tau_env && *tau_env) {
    try {
      tau = std::stod(tau_env);
    } catch (const std::exception&) {
      throw UsageError(std::string("CONTFOOD_TAU must be a number, got \"") + tau_env + "\"");
    }
  }
}

nlohmann::json QueueEntry::to_json() const {
  return {{"id", id},
          {"item_name", item_name},
          {"probability", probability},
          {"flagged_reason", flagged_reason},
          {"enqueued_at", enqueued_at},
          {"status", status_token(status)}};
}

QueueEntry QueueEntry::from_json(const nlohmann::json& j) {
  QueueEntry e;
  e.id = j.at("id").get<std::uint64_t>();
  e.item_name = j.at("item_name").get<std::string>();
  e.probability = j.at("probability").get<double>();
  e.flagged_reason = j.at("flagged_reason").get<std::string>();
  e.enqueued_at = j.at("enqueued_at").get<std::string>();
  e.status = j.at("status").get<std::string>() == "labeled" ? QueueStatus::labeled : QueueStatus::pending;
  return e;
}

nlohmann::json LabelEvent::to_json() const {
  nlohmann::json j{{"seq", seq},     {"item_name", item_name}, {"label", label_token(label)},
                   {"source", source}, {"timestamp", timestamp}};
  j["id"] = id ? nlohmann::json(*id) : nlohmann::json(nullptr);
  return j;
}

LabelEvent LabelEvent::from_json(const nlohmann::json& j) {
  LabelEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  if (j.contains("id") && !j.at("id").is_null()) e.id = j.at("id").get<std::uint64_t>();
  e.item_name = j.at("item_name").get<std::string>();
  const auto l = parse_label_token(j.at("label").get<std::string>());
  if (!l) throw DataError("label log: bad label token");
  e.label = *l;
  e.source = j.value("source", std::string("human"));
  e.timestamp = j.value("timestamp", std::string());
  return e;
}

// ---------------------------------------------------------------------------

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  if (!(options_.tau >= 0.0 && options_.tau < 0.5)) throw UsageError("tau must lie in [0, 0.5)");
  options_.increment.validate();
  load_state();
}

Service::~Service() { stop(); }

void Service::load_state() {
  const fs::path dir(options_.data_dir);
  fs::create_directories(dir);

  const fs::path own_ckpt = dir / "model.ckpt.json";
  if (fs::exists(own_ckpt)) {
    snapshot_ = std::make_shared<const Checkpoint>(Checkpoint::read(own_ckpt.string()));
  } else if (!options_.checkpoint_path.empty()) {
    snapshot_ = std::make_shared<const Checkpoint>(Checkpoint::read(options_.checkpoint_path));
  }

  if (const auto h = locate(options_, "history.csv"); !h.empty()) {
    training_history_ = history_from_csv(codec::read_file(h.string()));
  }

  if (snapshot_) {
    if (const auto b = locate(options_, "buffer.jsonl"); !b.empty()) {
      buffer_ = std::make_unique<ReplayBuffer>(ReplayBuffer::load(b.string(), snapshot_->vectorizer));
    }
  }
  if (!buffer_) buffer_ = std::make_unique<ReplayBuffer>(ReplayBuffer::kDefaultCapacity, options_.increment.seed);

  for (const auto& j : read_jsonl(dir / "queue.jsonl")) {
    try {
      entries_.push_back(QueueEntry::from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("queue.jsonl: ") + e.what());
    }
    const auto& e = entries_.back();
    next_id_ = std::max(next_id_, e.id + 1);
    if (e.status == QueueStatus::pending) pending_by_name_[normalize_name(e.item_name)] = e.id;
  }

  std::uint64_t consumed = 0;
  for (const auto& j : read_jsonl(dir / "increments.jsonl")) {
    consumed = j.value("label_log_offset", consumed);
    if (j.contains("report")) reports_.push_back(j.at("report"));
  }
  for (const auto& j : read_jsonl(dir / "labels.jsonl")) {
    LabelEvent e;
    try {
      e = LabelEvent::from_json(j);
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("labels.jsonl: ") + ex.what());
    }
    next_seq_ = std::max(next_seq_, e.seq + 1);
    if (e.seq >= consumed) staging_.push_back(std::move(e));
  }

  fs::path old_test = options_.old_test_path;
  if (old_test.empty() && fs::exists(dir / "old_test.csv")) old_test = dir / "old_test.csv";
  if (!old_test.empty()) old_test_ = ingest(old_test.string());
}

void Service::persist_queue() const {
  std::string text;
  for (const auto& e : entries_) text += e.to_json().dump() + '\n';
  codec::write_file_atomic((fs::path(options_.data_dir) / "queue.jsonl").string(), text);
}

std::shared_ptr<const Checkpoint> Service::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

std::size_t Service::staged() const {
  std::lock_guard lock(write_mutex_);
  return staging_.size();
}

Response Service::classify(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("item_name") || !body.at("item_name").is_string()) {
    return error_response(400, "bad_request", "body must be {\"item_name\": string}");
  }
  const auto name = body.at("item_name").get<std::string>();
  if (normalize_name(name).empty()) return error_response(400, "bad_request", "item_name must be non-empty");
  const auto ckpt = snapshot();
  if (!ckpt) return error_response(503, "no_model", "no model loaded");

  const auto verdict = detect_novel(*ckpt, name, options_.tau);
  nlohmann::json out{{"item_name", name},
                     {"label", label_token(label_from_int(verdict.probability >= 0.5 ? 1 : 0))},
                     {"probability", verdict.probability},
                     {"novel", verdict.flagged}};
  if (verdict.flagged) {
    out["reason"] = *verdict.reason;
    std::lock_guard lock(write_mutex_);
    const auto key = normalize_name(name);
    if (auto it = pending_by_name_.find(key); it != pending_by_name_.end()) {
      out["queue_id"] = it->second;
    } else {
      QueueEntry e{next_id_++, name, verdict.probability, *verdict.reason, codec::utc_timestamp(), QueueStatus::pending};
      entries_.push_back(e);
      pending_by_name_[key] = e.id;
      persist_queue();
      out["queue_id"] = e.id;
    }
  }
  return {200, out};
}

Response Service::queue() const {
  std::lock_guard lock(write_mutex_);
  auto arr = nlohmann::json::array();
  for (const auto& e : entries_) {
    if (e.status == QueueStatus::pending) arr.push_back(e.to_json());
  }
  return {200, arr};
}

Response Service::label(const nlohmann::json& body) {
  if (!body.is_object()) return error_response(400, "bad_request", "body must be a JSON object");
  if (!body.contains("label") || !body.at("label").is_string()) {
    return error_response(400, "bad_request", "missing label (allowed values: veg, nonveg)");
  }
  const auto token = body.at("label").get<std::string>();
  const auto label = parse_label_token(token);
  if (!label) {
    return error_response(400, "invalid_label", "invalid label \"" + token + "\" (allowed values: veg, nonveg)");
  }
  std::string source = "human";
  if (body.contains("source")) {
    if (!body.at("source").is_string() ||
        (body.at("source").get<std::string>() != "human" && body.at("source").get<std::string>() != "heuristic")) {
      return error_response(400, "bad_request", "source must be \"human\" or \"heuristic\"");
    }
    source = body.at("source").get<std::string>();
  }

  std::lock_guard lock(write_mutex_);
  LabelEvent ev;
  QueueEntry* entry = nullptr;
  if (body.contains("id")) {
    if (!body.at("id").is_number_unsigned()) return error_response(400, "bad_request", "id must be a queue id");
    const auto id = body.at("id").get<std::uint64_t>();
    for (auto& e : entries_) {
      if (e.id == id) entry = &e;
    }
    if (!entry) return error_response(404, "not_found", "unknown queue id " + std::to_string(id));
    if (entry->status != QueueStatus::pending) {
      return error_response(409, "already_labeled", "queue entry " + std::to_string(id) + " is already labeled");
    }
    ev.id = id;
    ev.item_name = entry->item_name;
  } else if (body.contains("item_name") && body.at("item_name").is_string()) {
    ev.item_name = body.at("item_name").get<std::string>();
    if (normalize_name(ev.item_name).empty()) return error_response(400, "bad_request", "item_name must be non-empty");
    if (auto it = pending_by_name_.find(normalize_name(ev.item_name)); it != pending_by_name_.end()) {
      for (auto& e : entries_) {
        if (e.id == it->second) entry = &e;
      }
      ev.id = it->second;
    }
  } else {
    return error_response(400, "bad_request", "body must carry a queue id or an item_name");
  }
  ev.seq = next_seq_;
  ev.label = *label;
  ev.source = source;
  ev.timestamp = codec::utc_timestamp();
  append_line(fs::path(options_.data_dir) / "labels.jsonl", ev.to_json());
  ++next_seq_;
  if (entry) {
    entry->status = QueueStatus::labeled;
    pending_by_name_.erase(normalize_name(entry->item_name));
    persist_queue();
  }
  staging_.push_back(ev);
  return {201, ev.to_json()};
}

Response Service::run_increment(const nlohmann::json& body) {
  std::unique_lock guard(increment_mutex_, std::try_to_lock);
  if (!guard.owns_lock()) return error_response(409, "increment_in_progress", "an increment is already running");
  return increment_locked(body);
}

LabeledMatrix Service::old_test_set(const Checkpoint& ckpt, const Corpus& staged) const {
  if (old_test_) return vectorize_corpus(ckpt.vectorizer, *old_test_);
  if (buffer_->size() > 0) {
    LabeledMatrix m;
    m.dim = ckpt.vectorizer.dim();
    for (const auto& it : buffer_->items()) m.push_back(it.vector, it.label);
    return m;
  }
  return vectorize_corpus(ckpt.vectorizer, staged);
}

Response Service::increment_locked(const nlohmann::json& body) {
  if (!body.is_object()) return error_response(400, "bad_request", "body must be a JSON object");
  Strategy strategy = Strategy::replay;
  if (body.contains("strategy")) {
    if (!body.at("strategy").is_string()) return error_response(400, "bad_request", "strategy must be a string");
    const auto s = body.at("strategy").get<std::string>();
    if (s != "replay" && s != "naive") {
      return error_response(400, "bad_request", "unknown strategy \"" + s + "\" (allowed values: replay, naive)");
    }
    strategy = parse_strategy(s);
  }
  IncrementConfig config = options_.increment;
  if (body.contains("epochs") && !body.at("epochs").is_null()) {
    if (!body.at("epochs").is_number_unsigned() || body.at("epochs").get<std::uint64_t>() == 0) {
      return error_response(400, "bad_request", "epochs must be a positive integer");
    }
    config.epochs = body.at("epochs").get<std::size_t>();
  }
  const auto before = snapshot();
  if (!before) return error_response(503, "no_model", "no model loaded");

  std::vector<LabelEvent> batch;
  {
    std::lock_guard lock(write_mutex_);
    batch = staging_;
  }
  if (batch.empty()) return error_response(422, "empty_staging", "no labeled items are staged for an increment");

  Corpus items;
  items.source = "staging";
  for (const auto& ev : batch) items.records.push_back({ev.item_name, ev.label, {}});
  config.seed = derive_seed(options_.increment.seed, "service-increment", before->increments_applied);

  const auto started = codec::utc_timestamp();
  const auto old_test = old_test_set(*before, items);
  auto result = increment(*before, *buffer_, items, strategy, config);
  auto report = forgetting_report(*before, result.checkpoint, old_test, strategy, result.new_items_count,
                                  config.threshold);
  report.seed = config.seed;
  report.started_at = started;
  report.seconds = result.seconds;
  report.items = result.outcomes;
  const auto report_json = report.to_json();

  const fs::path dir(options_.data_dir);
  result.checkpoint.write((dir / "model.ckpt.json").string());
  buffer_->save((dir / "buffer.jsonl").string());
  append_line(dir / "increments.jsonl", {{"label_log_offset", batch.back().seq + 1}, {"report", report_json}});
  {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::make_shared<const Checkpoint>(std::move(result.checkpoint));
  }
  {
    std::lock_guard lock(write_mutex_);
    staging_.erase(staging_.begin(), staging_.begin() + static_cast<std::ptrdiff_t>(batch.size()));
    reports_.push_back(report_json);
  }
  return {200, report_json};
}

Response Service::model() const {
  const auto ckpt = snapshot();
  if (!ckpt) return error_response(503, "no_model", "no model loaded");
  return {200,
          {{"format_version", Checkpoint::kFormatVersion},
           {"vocab_size", ckpt->vectorizer.dim()},
           {"layer_dims", ckpt->params.dims()},
           {"increments_applied", ckpt->increments_applied},
           {"vocabulary_hash", ckpt->vectorizer.vocabulary_hash()},
           {"created_at", ckpt->created_at}}};
}

Response Service::history() const {
  if (!snapshot()) return error_response(503, "no_model", "no model loaded");
  std::lock_guard lock(write_mutex_);
  auto training = nlohmann::json::array();
  for (const auto& r : training_history_) training.push_back(to_json(r));
  return {200, {{"training", training}, {"increments", reports_}}};
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  nlohmann::json j = nlohmann::json::object();
  if (method == "POST" && !body.empty()) {
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "bad_json", e.what());
    }
  }
  try {
    if (method == "POST" && path == "/v1/classify") return classify(j);
    if (method == "GET" && path == "/v1/queue") return queue();
    if (method == "POST" && path == "/v1/labels") return label(j);
    if (method == "POST" && path == "/v1/increment") return run_increment(j);
    if (method == "GET" && path == "/v1/model") return model();
    if (method == "GET" && path == "/v1/metrics/history") return history();
  } catch (const NumericError& e) {
    return error_response(500, "numeric_failure", e.what());
  } catch (const DataError& e) {
    return error_response(500, "data_error", e.what());
  }
  return error_response(404, "not_found", "no route for " + method + " " + path);
}

void Service::build_server() {
  server_ = std::make_unique<httplib::Server>();
  server_->set_read_timeout(options_.request_timeout_seconds);
  server_->set_write_timeout(options_.request_timeout_seconds);
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* p : {"/v1/classify", "/v1/labels", "/v1/increment"}) server_->Post(p, route);
  for (const char* p : {"/v1/queue", "/v1/model", "/v1/metrics/history"}) server_->Get(p, route);
  // Anything else under /v1/ gets the JSON 404 from handle().
  server_->Get(R"(/v1/.*)", route);
  server_->Post(R"(/v1/.*)", route);
  if (!options_.static_dir.empty() && !server_->set_mount_point("/", options_.static_dir)) {
    throw DataError("static directory not found: " + options_.static_dir);
  }
}

void Service::listen() {
  build_server();
  std::cerr << "contfood: serving on http://" << options_.host << ':' << options_.port << '\n';
  if (!server_->listen(options_.host, options_.port)) {
    throw DataError("cannot listen on " + options_.host + ":" + std::to_string(options_.port));
  }
}

int Service::start() {
  build_server();
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) throw DataError("cannot bind " + options_.host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace contfood
