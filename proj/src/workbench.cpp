#include "deskmt/workbench.hpp"

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "deskmt/checkpoint.hpp"
#include "deskmt/errors.hpp"

namespace deskmt {

using nlohmann::json;

namespace {

enum class SegmentStatus { pending, machine_translated, post_edited, accepted };
enum class JobState { queued, running, done, failed };

const char* to_string(SegmentStatus s) {
  switch (s) {
    case SegmentStatus::pending: return "pending";
    case SegmentStatus::machine_translated: return "machine_translated";
    case SegmentStatus::post_edited: return "post_edited";
    case SegmentStatus::accepted: return "accepted";
  }
  return "?";
}

const char* to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

struct Segment {
  int id = 0;
  int document = 0;
  std::string source;
  std::optional<std::string> reference;
  std::optional<std::string> translation;
  std::optional<std::string> provenance;
  std::optional<std::string> post_edit;
  SegmentStatus status = SegmentStatus::pending;
};

struct Job {
  int id = 0;
  std::vector<int> segment_ids;
  int extra_epochs = 1;
  JobState state = JobState::queued;
  std::string message;
  json before;
  json after;
  std::string checkpoint;
};

json segment_json(const Segment& s) {
  auto opt = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
  return {{"id", s.id},
          {"document", s.document},
          {"source", s.source},
          {"reference", opt(s.reference)},
          {"translation", opt(s.translation)},
          {"provenance", opt(s.provenance)},
          {"post_edit", opt(s.post_edit)},
          {"status", to_string(s.status)}};
}

json job_json(const Job& j) {
  json out{{"id", j.id},
           {"state", to_string(j.state)},
           {"segment_ids", j.segment_ids},
           {"pairs", j.segment_ids.size()},
           {"extra_epochs", j.extra_epochs},
           {"message", j.message.empty() ? json(nullptr) : json(j.message)},
           {"before", j.before},
           {"after", j.after},
           {"checkpoint", j.checkpoint.empty() ? json(nullptr) : json(j.checkpoint)}};
  if (j.before.is_object() && j.after.is_object()) {
    out["bleu_delta"] = j.after["bleu"].get<double>() - j.before["bleu"].get<double>();
    out["ter_delta"] = j.after["ter"].get<double>() - j.before["ter"].get<double>();
  }
  return out;
}

json report_summary(const EvalReport& r) {
  return {{"bleu", r.bleu}, {"ter", r.ter}, {"brevity_penalty", r.brevity_penalty}, {"pairs", r.ter_sentences.size()}};
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (end == text.size() && line.empty()) break;
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> text_field(const json& v, const char* name) {
  if (v.is_string()) return split_lines(v.get<std::string>());
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ApiError(400, std::string("'") + name + "' entries must be strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  throw ApiError(400, std::string("'") + name + "' must be a string or an array of strings");
}

std::string normalized(const std::string& line) { return join(tokenize(line)); }

}  // namespace

struct Workbench::State {
  mutable std::mutex mu;
  mutable std::condition_variable cv;

  Preprocessing prep;
  std::map<int, std::vector<int>> documents;
  std::map<int, Segment> segments;
  std::map<int, Job> jobs;
  int next_document = 1;
  int next_segment = 1;
  int next_job = 1;

  std::shared_ptr<const Translator> translator;
  std::string serving_hash;
  std::string serving_file;
  std::atomic<bool> swapping{false};

  std::ofstream log;
  std::thread worker;
  bool stopping = false;
  std::optional<int> queued;

  void append(const json& event) {
    log << event.dump() << '\n';
    log.flush();
    if (!log) throw Error("cannot append to the event log");
  }

  std::optional<int> active_job() const {
    for (const auto& [id, j] : jobs) {
      if (j.state == JobState::queued || j.state == JobState::running) return id;
    }
    return std::nullopt;
  }

  std::vector<int> pending_ids() const {
    std::vector<int> ids;
    for (const auto& [id, s] : segments) {
      if (s.status == SegmentStatus::post_edited) ids.push_back(id);
    }
    return ids;
  }

  Segment& segment(int id) {
    auto it = segments.find(id);
    if (it == segments.end()) throw ApiError(404, "unknown segment " + std::to_string(id));
    return it->second;
  }
};

namespace {

constexpr const char* kEventsFile = "events.jsonl";

}  // namespace

Workbench::Workbench(WorkbenchConfig config) : config_(std::move(config)), state_(std::make_unique<State>()) {
  auto& st = *state_;
  st.prep = Preprocessing::load(config_.prep_dir);
  const auto ckpt_dir = config_.state_dir / "checkpoints";
  std::filesystem::create_directories(ckpt_dir);
  const auto events_path = config_.state_dir / kEventsFile;

  auto load_serving = [&](const std::string& file, const std::string& hash) {
    auto ckpt = std::make_shared<const Checkpoint>(load_checkpoint(ckpt_dir / file));
    const auto actual = checkpoint_hash(*ckpt);
    if (!hash.empty() && actual != hash) throw CorruptionError("checkpoint " + file + " does not match the event log");
    st.translator = std::make_shared<const Translator>(ckpt, st.prep);
    st.serving_hash = actual;
    st.serving_file = file;
  };

  std::vector<int> interrupted;
  if (std::filesystem::exists(events_path)) {
    std::ifstream in(events_path);
    std::string line;
    std::string file, hash;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json e;
      try {
        e = json::parse(line);
      } catch (const json::exception&) {
        break;  // torn final write
      }
      const auto type = e.at("type").get<std::string>();
      if (type == "init") {
        file = e.at("checkpoint_file").get<std::string>();
        hash = e.at("checkpoint").get<std::string>();
      } else if (type == "document") {
        const int doc = e.at("id").get<int>();
        auto& ids = st.documents[doc];
        for (const auto& s : e.at("segments")) {
          Segment seg;
          seg.id = s.at("id").get<int>();
          seg.document = doc;
          seg.source = s.at("source").get<std::string>();
          if (s.contains("reference") && !s["reference"].is_null()) seg.reference = s["reference"].get<std::string>();
          ids.push_back(seg.id);
          st.next_segment = std::max(st.next_segment, seg.id + 1);
          st.segments[seg.id] = std::move(seg);
        }
        st.next_document = std::max(st.next_document, doc + 1);
      } else if (type == "translated") {
        auto& seg = st.segments.at(e.at("segment").get<int>());
        seg.translation = e.at("text").get<std::string>();
        seg.provenance = e.at("provenance").get<std::string>();
        seg.status = SegmentStatus::machine_translated;
      } else if (type == "postedited") {
        auto& seg = st.segments.at(e.at("segment").get<int>());
        seg.post_edit = e.at("text").get<std::string>();
        seg.status = SegmentStatus::post_edited;
      } else if (type == "job_created") {
        Job j;
        j.id = e.at("id").get<int>();
        j.segment_ids = e.at("segment_ids").get<std::vector<int>>();
        j.extra_epochs = e.at("extra_epochs").get<int>();
        st.next_job = std::max(st.next_job, j.id + 1);
        st.jobs[j.id] = std::move(j);
      } else if (type == "job_started") {
        st.jobs.at(e.at("id").get<int>()).state = JobState::running;
      } else if (type == "job_done") {
        auto& j = st.jobs.at(e.at("id").get<int>());
        j.state = JobState::done;
        j.before = e.at("before");
        j.after = e.at("after");
        j.checkpoint = e.at("checkpoint").get<std::string>();
        file = e.at("checkpoint_file").get<std::string>();
        hash = j.checkpoint;
        for (int id : j.segment_ids) st.segments.at(id).status = SegmentStatus::accepted;
      } else if (type == "job_failed") {
        auto& j = st.jobs.at(e.at("id").get<int>());
        j.state = JobState::failed;
        j.message = e.at("message").get<std::string>();
      } else {
        throw FormatError("unknown event type '" + type + "' in " + events_path.string());
      }
    }
    if (file.empty()) throw FormatError("event log has no initial checkpoint");
    load_serving(file, hash);
    for (const auto& [id, j] : st.jobs) {
      if (j.state == JobState::queued || j.state == JobState::running) interrupted.push_back(id);
    }
    st.log.open(events_path, std::ios::app);
  } else {
    std::filesystem::copy_file(config_.base_checkpoint, ckpt_dir / "ckpt-0.ckpt",
                               std::filesystem::copy_options::overwrite_existing);
    load_serving("ckpt-0.ckpt", "");
    st.log.open(events_path, std::ios::app);
    st.append({{"type", "init"}, {"checkpoint_file", st.serving_file}, {"checkpoint", st.serving_hash}});
  }
  if (!st.log) throw Error("cannot open " + events_path.string());
  for (int id : interrupted) {
    auto& j = st.jobs.at(id);
    j.state = JobState::failed;
    j.message = "interrupted by a service restart";
    st.append({{"type", "job_failed"}, {"id", id}, {"message", j.message}});
  }

  st.worker = std::thread([this] {
    auto& s = *state_;
    std::unique_lock lock(s.mu);
    while (true) {
      s.cv.wait(lock, [&] { return s.stopping || s.queued.has_value(); });
      if (s.stopping) return;
      const int id = *s.queued;
      s.queued.reset();
      Job& job = s.jobs.at(id);
      job.state = JobState::running;
      s.append({{"type", "job_started"}, {"id", id}});
      ParallelCorpus pairs{"postedits-job-" + std::to_string(id), Domain::in_domain, {}};
      for (int sid : job.segment_ids) {
        const auto& seg = s.segments.at(sid);
        pairs.pairs.push_back({tokenize(seg.source), tokenize(*seg.post_edit)});
      }
      const int extra = job.extra_epochs;
      auto translator = s.translator;
      s.cv.notify_all();
      lock.unlock();

      json before, after;
      std::string file, hash;
      std::string failure;
      try {
        if (config_.job_hook) config_.job_hook(id);
        const auto& current = translator->checkpoint();
        if (!config_.probe.empty()) before = report_summary(evaluate_model(current, s.prep, config_.probe, config_.decode));
        auto next = specialize(current, s.prep.encode(pairs), extra).first;
        if (!config_.probe.empty()) after = report_summary(evaluate_model(next, s.prep, config_.probe, config_.decode));
        s.swapping = true;
        file = "ckpt-" + std::to_string(id) + ".ckpt";
        save_checkpoint(next, config_.state_dir / "checkpoints" / file);
        hash = checkpoint_hash(next);
        auto fresh = std::make_shared<const Translator>(std::make_shared<const Checkpoint>(std::move(next)), s.prep);
        lock.lock();
        s.append({{"type", "job_done"},
                  {"id", id},
                  {"before", before},
                  {"after", after},
                  {"checkpoint", hash},
                  {"checkpoint_file", file}});
        s.translator = std::move(fresh);
        s.serving_hash = hash;
        s.serving_file = file;
        Job& j = s.jobs.at(id);
        j.state = JobState::done;
        j.before = before;
        j.after = after;
        j.checkpoint = hash;
        for (int sid : j.segment_ids) s.segments.at(sid).status = SegmentStatus::accepted;
        s.swapping = false;
      } catch (const std::exception& e) {
        failure = e.what();
        if (failure.empty()) failure = "adaptation failed";
      } catch (...) {
        failure = "adaptation failed";
      }
      if (!lock.owns_lock()) lock.lock();
      if (!failure.empty()) {
        s.swapping = false;
        Job& j = s.jobs.at(id);
        j.state = JobState::failed;
        j.message = failure;
        try {
          s.append({{"type", "job_failed"}, {"id", id}, {"message", failure}});
        } catch (const std::exception&) {
        }
      }
      s.cv.notify_all();
    }
  });
}

Workbench::~Workbench() {
  {
    std::lock_guard lock(state_->mu);
    state_->stopping = true;
  }
  state_->cv.notify_all();
  if (state_->worker.joinable()) state_->worker.join();
}

std::string Workbench::create_document(const std::string& body, const std::string& content_type) {
  if (body.size() > config_.max_body_bytes) {
    throw ApiError(400, "document exceeds " + std::to_string(config_.max_body_bytes) + " bytes");
  }
  std::vector<std::string> sources, targets;
  if (content_type.find("json") != std::string::npos) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      throw ApiError(400, "body is not valid JSON");
    }
    if (!j.is_object() || !j.contains("source")) throw ApiError(400, "expected an object with a 'source' field");
    sources = text_field(j["source"], "source");
    if (j.contains("target") && !j["target"].is_null()) {
      targets = text_field(j["target"], "target");
      if (targets.size() != sources.size()) {
        throw ApiError(400, "source and target line counts differ: " + std::to_string(sources.size()) + " vs " +
                                std::to_string(targets.size()));
      }
    }
  } else {
    sources = split_lines(body);
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    sources[i] = normalized(sources[i]);
    if (sources[i].empty()) throw ApiError(400, "line " + std::to_string(i + 1) + " is empty");
    if (!targets.empty()) targets[i] = normalized(targets[i]);
  }
  if (sources.empty()) throw ApiError(400, "document is empty");

  auto& st = *state_;
  std::lock_guard lock(st.mu);
  const int doc = st.next_document;
  json segs = json::array();
  std::vector<Segment> created;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Segment s;
    s.id = st.next_segment + static_cast<int>(i);
    s.document = doc;
    s.source = sources[i];
    if (!targets.empty()) s.reference = targets[i];
    segs.push_back({{"id", s.id}, {"source", s.source}, {"reference", s.reference ? json(*s.reference) : json(nullptr)}});
    created.push_back(std::move(s));
  }
  st.append({{"type", "document"}, {"id", doc}, {"segments", segs}});
  st.next_document = doc + 1;
  st.next_segment += static_cast<int>(created.size());
  json out{{"id", doc}, {"segments", json::array()}};
  for (auto& s : created) {
    out["segments"].push_back(segment_json(s));
    st.documents[doc].push_back(s.id);
    st.segments[s.id] = std::move(s);
  }
  return out.dump();
}

std::string Workbench::get_document(int id) const {
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  auto it = st.documents.find(id);
  if (it == st.documents.end()) throw ApiError(404, "unknown document " + std::to_string(id));
  json out{{"id", id}, {"segments", json::array()}};
  for (int sid : it->second) out["segments"].push_back(segment_json(st.segments.at(sid)));
  return out.dump();
}

std::string Workbench::get_segment(int id) const {
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  auto it = st.segments.find(id);
  if (it == st.segments.end()) throw ApiError(404, "unknown segment " + std::to_string(id));
  return segment_json(it->second).dump();
}

std::string Workbench::translate_segment(int id) {
  auto& st = *state_;
  std::shared_ptr<const Translator> translator;
  std::string hash, source;
  {
    std::lock_guard lock(st.mu);
    auto& seg = st.segment(id);
    if (seg.status != SegmentStatus::pending && seg.status != SegmentStatus::machine_translated) {
      throw ApiError(409, std::string("segment is ") + to_string(seg.status));
    }
    if (st.swapping) throw ApiError(409, "checkpoint swap in progress, retry");
    translator = st.translator;
    hash = st.serving_hash;
    source = seg.source;
  }
  const std::string text = join(translator->translate(tokenize(source), config_.decode));
  std::lock_guard lock(st.mu);
  auto& seg = st.segment(id);
  if (seg.status != SegmentStatus::pending && seg.status != SegmentStatus::machine_translated) {
    throw ApiError(409, std::string("segment is ") + to_string(seg.status));
  }
  st.append({{"type", "translated"}, {"segment", id}, {"text", text}, {"provenance", hash}});
  seg.translation = text;
  seg.provenance = hash;
  seg.status = SegmentStatus::machine_translated;
  return segment_json(seg).dump();
}

std::string Workbench::postedit_segment(int id, const std::string& body) {
  std::string text;
  try {
    const json j = json::parse(body);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw ApiError(400, "expected an object with a string 'text' field");
    }
    text = j["text"].get<std::string>();
  } catch (const json::exception&) {
    throw ApiError(400, "body is not valid JSON");
  }
  text = normalized(text);
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  auto& seg = st.segment(id);
  if (text.empty()) throw ApiError(400, "post-edit is empty");
  if (seg.status != SegmentStatus::machine_translated) {
    throw ApiError(409, std::string("segment is ") + to_string(seg.status) + ", expected machine_translated");
  }
  st.append({{"type", "postedited"}, {"segment", id}, {"text", text}});
  seg.post_edit = text;
  seg.status = SegmentStatus::post_edited;
  return segment_json(seg).dump();
}

std::string Workbench::pending() const {
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  const auto ids = st.pending_ids();
  return json{{"count", ids.size()}, {"segment_ids", ids}}.dump();
}

std::string Workbench::create_job(const std::string& body) {
  int extra = config_.default_extra_epochs;
  std::size_t min_pairs = config_.default_min_pairs;
  if (!body.empty()) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      throw ApiError(400, "body is not valid JSON");
    }
    if (!j.is_object()) throw ApiError(400, "expected a JSON object");
    try {
      if (j.contains("extra_epochs")) extra = j["extra_epochs"].get<int>();
      if (j.contains("min_pairs")) min_pairs = j["min_pairs"].get<std::size_t>();
    } catch (const json::exception&) {
      throw ApiError(400, "extra_epochs and min_pairs must be non-negative integers");
    }
  }
  if (extra < 1) throw ApiError(400, "extra_epochs must be at least 1");
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  if (auto active = st.active_job()) throw ApiError(409, "job " + std::to_string(*active) + " is still active");
  auto ids = st.pending_ids();
  if (ids.size() < min_pairs || ids.empty()) {
    throw ApiError(412, std::to_string(ids.size()) + " post-edited pairs pending, " + std::to_string(std::max<std::size_t>(min_pairs, 1)) +
                            " required");
  }
  Job job;
  job.id = st.next_job;
  job.segment_ids = std::move(ids);
  job.extra_epochs = extra;
  st.append({{"type", "job_created"}, {"id", job.id}, {"segment_ids", job.segment_ids}, {"extra_epochs", extra}});
  st.next_job = job.id + 1;
  const auto out = job_json(job).dump();
  st.queued = job.id;
  st.jobs[job.id] = std::move(job);
  st.cv.notify_all();
  return out;
}

std::string Workbench::get_job(int id) const {
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  auto it = st.jobs.find(id);
  if (it == st.jobs.end()) throw ApiError(404, "unknown job " + std::to_string(id));
  return job_json(it->second).dump();
}

std::string Workbench::status() const {
  auto& st = *state_;
  std::lock_guard lock(st.mu);
  const auto& ck = st.translator->checkpoint();
  json prov = json::array();
  for (const auto& p : ck.provenance) prov.push_back({{"corpus", p.corpus}, {"epochs", p.epochs}, {"timestamp", p.timestamp}});
  const auto active = st.active_job();
  const auto& c = ck.config;
  return json{{"checkpoint",
               {{"hash", st.serving_hash},
                {"file", st.serving_file},
                {"epochs_completed", ck.epochs_completed},
                {"current_lr", ck.current_lr},
                {"provenance", prov}}},
              {"pending_pairs", st.pending_ids().size()},
              {"documents", st.documents.size()},
              {"segments", st.segments.size()},
              {"jobs", st.jobs.size()},
              {"active_job", active ? json(*active) : json(nullptr)},
              {"swapping", st.swapping.load()},
              {"probe_pairs", config_.probe.size()},
              {"model",
               {{"emb_dim", c.emb_dim},
                {"hidden_dim", c.hidden_dim},
                {"num_layers", c.num_layers},
                {"src_vocab_size", c.src_vocab_size},
                {"tgt_vocab_size", c.tgt_vocab_size},
                {"dropout_p", c.dropout_p}}}}
      .dump();
}

void Workbench::wait_idle() const {
  auto& st = *state_;
  std::unique_lock lock(st.mu);
  st.cv.wait(lock, [&] { return !st.active_job().has_value(); });
}

namespace {

constexpr const char* kFallbackPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>deskmt workbench</title></head>
<body>
<h1>deskmt workbench</h1>
<p>No UI bundle is installed. The JSON API is available:</p>
<ul>
<li>POST /documents</li><li>GET /documents/{id}</li><li>GET /segments/{id}</li>
<li>POST /segments/{id}/translate</li><li>POST /segments/{id}/postedit</li>
<li>GET /adaptation/pending</li><li>POST /adaptation/jobs</li><li>GET /adaptation/jobs/{id}</li>
<li>GET /status</li>
</ul>
</body></html>
)";

}  // namespace

struct WorkbenchServer::Impl {
  Workbench& bench;
  httplib::Server server;
  explicit Impl(Workbench& b) : bench(b) {}
};

WorkbenchServer::WorkbenchServer(Workbench& bench) : impl_(std::make_unique<Impl>(bench)) {
  auto& srv = impl_->server;
  auto& wb = impl_->bench;
  srv.set_payload_max_length(wb.config().max_body_bytes + 1);

  auto wrap = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(fn(req), "application/json");
        res.status = 200;
      } catch (const ApiError& e) {
        res.status = e.status();
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };
  auto id_of = [](const httplib::Request& req) {
    try {
      return std::stoi(req.matches[1].str());
    } catch (const std::exception&) {
      throw ApiError(404, "unknown id");
    }
  };

  srv.Post("/documents", wrap([&wb](const httplib::Request& r) {
             return wb.create_document(r.body, r.get_header_value("Content-Type"));
           }));
  srv.Get(R"(/documents/(\d+))", wrap([&wb, id_of](const httplib::Request& r) { return wb.get_document(id_of(r)); }));
  srv.Get(R"(/segments/(\d+))", wrap([&wb, id_of](const httplib::Request& r) { return wb.get_segment(id_of(r)); }));
  srv.Post(R"(/segments/(\d+)/translate)",
           wrap([&wb, id_of](const httplib::Request& r) { return wb.translate_segment(id_of(r)); }));
  srv.Post(R"(/segments/(\d+)/postedit)",
           wrap([&wb, id_of](const httplib::Request& r) { return wb.postedit_segment(id_of(r), r.body); }));
  srv.Get("/adaptation/pending", wrap([&wb](const httplib::Request&) { return wb.pending(); }));
  srv.Post("/adaptation/jobs", wrap([&wb](const httplib::Request& r) { return wb.create_job(r.body); }));
  srv.Get(R"(/adaptation/jobs/(\d+))", wrap([&wb, id_of](const httplib::Request& r) { return wb.get_job(id_of(r)); }));
  srv.Get("/status", wrap([&wb](const httplib::Request&) { return wb.status(); }));

  const auto& dir = wb.config().static_dir;
  if (dir.empty() || !std::filesystem::is_directory(dir) || !srv.set_mount_point("/", dir.string())) {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kFallbackPage, "text/html"); });
  }
}

WorkbenchServer::~WorkbenchServer() { stop(); }

int WorkbenchServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int bound = srv.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!srv.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void WorkbenchServer::run() { impl_->server.listen_after_bind(); }

void WorkbenchServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace deskmt
