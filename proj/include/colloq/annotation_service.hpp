#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "colloq/annotation_engine.hpp"
#include "colloq/corpus_store.hpp"

namespace httplib {
class Server;
}

namespace colloq {

struct HttpRequest {
  std::string method;  // GET, POST
  std::string path;
  std::map<std::string, std::string> params;
  std::string token;  // X-Annotation-Token header
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceConfig {
  std::string token;  // empty: no authentication
  std::filesystem::path guidelines_path = data_dir() / "guidelines.md";
  std::filesystem::path schema_path = data_dir() / "api_schema.json";
  std::string guidelines_version = "1";
};

// Numbered rules ("1. ...") from a guideline document, continuation lines
// folded into their rule.
std::vector<std::string> guideline_rules(const std::string& markdown);

// JSON-over-HTTP surface of the annotation workflow. `handle` is the whole
// protocol; `serve` only adapts it to a socket.
//   GET  /api/task?annotator=ID&round=R   200 TaskView | 204 | 404
//   POST /api/label                       201 | 409 | 422 | 404
//   GET  /api/agreement, /api/stats, /api/guidelines, /api/schema
//   GET  /api/annotations                 JSONL export
class AnnotationService {
 public:
  AnnotationService(CorpusStore& store, AnnotationEngine& engine,
                    ServiceConfig config);
  ~AnnotationService();

  HttpResponse handle(const HttpRequest& request);

  // Blocks until stop() is called or the socket fails. `on_ready` runs
  // once the listener is bound, with the bound port.
  bool serve(const std::string& host, int port,
             const std::function<void(int)>& on_ready = {});
  void stop();

 private:
  HttpResponse get_task(const HttpRequest& request);
  HttpResponse post_label(const HttpRequest& request);
  HttpResponse get_agreement();
  HttpResponse get_stats();
  HttpResponse get_guidelines();
  HttpResponse get_annotations();
  HttpResponse get_schema();

  CorpusStore& store_;
  AnnotationEngine& engine_;
  ServiceConfig config_;
  std::string guidelines_;
  std::string schema_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace colloq
