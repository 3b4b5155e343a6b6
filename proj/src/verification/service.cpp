#include "synthaug/verification/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <map>
#include <thread>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"

namespace synthaug::verification {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

bool safe_segment(const std::string& s) {
  return !s.empty() && s.find("..") == std::string::npos && s.find('\\') == std::string::npos;
}

std::string real_image_url(const std::string& image_id) { return "/images/real/" + image_id + ".png"; }

}  // namespace

struct VerificationService::Impl {
  ReviewStore& store;
  ServiceConfig config;
  httplib::Server server;
  std::map<std::string, dataset::ImageRecord> real_by_id;
  std::map<DefectClass, std::vector<std::string>> real_by_class;
  int port = -1;
  std::thread thread;

  Impl(ReviewStore& s, ServiceConfig c) : store(s), config(std::move(c)) {
    for (const auto& r : config.real_records) {
      real_by_id[r.image_id] = r;
      real_by_class[r.defect_class()].push_back(r.image_id);
    }
    for (auto& [_, ids] : real_by_class) std::sort(ids.begin(), ids.end());
    routes();
  }

  json task_json(const ReviewTask& t) const {
    json j = to_json(t);
    j["candidate_image_url"] = "/images/batches/" + t.candidate_image;
    json refs = json::array();
    for (const auto& id : t.reference_ids) refs.push_back(real_image_url(id));
    j["reference_image_urls"] = refs;
    return j;
  }

  void routes() {
    server.Get("/api/batches", [this](const httplib::Request&, httplib::Response& res) {
      store.reload();
      json list = json::array();
      for (const auto& p : store.list_batches()) list.push_back(to_json(p));
      send_json(res, 200, json{{"batches", list}});
    });

    server.Get(R"(/api/batches/([^/]+)/next-task)", [this](const httplib::Request& req,
                                                           httplib::Response& res) {
      const std::string batch_id = req.matches[1];
      try {
        if (!store.has_batch(batch_id)) store.reload();
        auto task = store.next_task(batch_id);
        send_json(res, 200,
                  json{{"task", task ? task_json(*task) : json(nullptr)},
                       {"progress", to_json(store.batch_progress(batch_id))}});
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      }
    });

    server.Post(R"(/api/candidates/([^/]+)/decision)", [this](const httplib::Request& req,
                                                              httplib::Response& res) {
      Decision d;
      d.candidate_id = req.matches[1];
      try {
        const json body = json::parse(req.body);
        reject_unknown_keys(body, {"verdict", "annotator", "reason"}, "decision body");
        d.verdict = parse_verdict(body.at("verdict").get<std::string>());
        d.annotator = body.at("annotator").get<std::string>();
        if (body.contains("reason") && !body["reason"].is_null()) {
          d.reason = body["reason"].get<std::string>();
        }
      } catch (const json::exception& e) {
        send_error(res, 400, std::string("bad decision body: ") + e.what());
        return;
      } catch (const Error& e) {
        send_error(res, 400, e.what());
        return;
      }
      try {
        const auto c = store.record_decision(d);
        send_json(res, 200,
                  json{{"candidate", generation::to_json(c)},
                       {"progress", to_json(store.batch_progress(c.batch_id))}});
      } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const StateError& e) {
        send_error(res, 409, e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      }
    });

    server.Get(R"(/api/real/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      DefectClass c;
      try {
        c = parse_defect_class(std::string(req.matches[1]));
      } catch (const DataError& e) {
        send_error(res, 404, e.what());
        return;
      }
      int page = 0;
      int page_size = config.default_page_size;
      try {
        if (req.has_param("page")) page = std::stoi(req.get_param_value("page"));
        if (req.has_param("page_size")) page_size = std::stoi(req.get_param_value("page_size"));
      } catch (const std::exception&) {
        send_error(res, 400, "page and page_size must be integers");
        return;
      }
      if (page < 0 || page_size < 1) {
        send_error(res, 400, "page must be >= 0 and page_size >= 1");
        return;
      }
      const auto& ids = real_by_class[c];
      json items = json::array();
      const std::size_t begin = static_cast<std::size_t>(page) * static_cast<std::size_t>(page_size);
      for (std::size_t i = begin; i < ids.size() && i < begin + static_cast<std::size_t>(page_size); ++i) {
        const auto& r = real_by_id.at(ids[i]);
        items.push_back(json{{"image_id", r.image_id}, {"group_id", r.group_id}, {"url", real_image_url(r.image_id)}});
      }
      send_json(res, 200,
                json{{"class", to_string(c)}, {"page", page}, {"page_size", page_size},
                     {"total", ids.size()}, {"items", items}});
    });

    server.Get(R"(/images/real/([^/]+)\.png)", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
      auto it = real_by_id.find(req.matches[1]);
      if (it == real_by_id.end()) {
        send_error(res, 404, "unknown real image");
        return;
      }
      const auto& path = it->second.crop_path.empty() ? it->second.source_path : it->second.crop_path;
      try {
        res.set_content(read_text_file(path), "image/png");
      } catch (const DataError& e) {
        send_error(res, 404, e.what());
      }
    });

    server.Get(R"(/images/batches/([^/]+)/images/([^/]+))", [this](const httplib::Request& req,
                                                                    httplib::Response& res) {
      const std::string batch = req.matches[1];
      const std::string file = req.matches[2];
      if (!safe_segment(batch) || !safe_segment(file)) {
        send_error(res, 400, "invalid path");
        return;
      }
      try {
        res.set_content(read_text_file(store.root() / batch / "images" / file), "image/png");
      } catch (const DataError& e) {
        send_error(res, 404, e.what());
      }
    });

    if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir.string());
  }
};

VerificationService::VerificationService(ReviewStore& store, ServiceConfig config)
    : impl_(std::make_unique<Impl>(store, std::move(config))) {}

VerificationService::~VerificationService() { stop(); }

int VerificationService::bind() {
  if (impl_->config.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->port = impl_->config.port;
  }
  if (impl_->port < 0) {
    throw ConfigError("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  return impl_->port;
}

void VerificationService::serve() { impl_->server.listen_after_bind(); }

int VerificationService::start_background() {
  const int port = bind();
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return port;
}

void VerificationService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace synthaug::verification
