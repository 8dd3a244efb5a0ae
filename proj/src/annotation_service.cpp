#include "colloq/annotation_service.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace colloq {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HttpResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error(int status, const std::string& message,
                   const std::string& code = {}) {
  json body{{"error", message}};
  if (!code.empty()) body["status"] = code;
  return json_response(status, body);
}

int http_status(SubmitStatus status) {
  switch (status) {
    case SubmitStatus::Accepted:
      return 201;
    case SubmitStatus::Duplicate:
    case SubmitStatus::NotServed:
      return 409;
    case SubmitStatus::InvalidLabel:
    case SubmitStatus::InvalidRound:
      return 422;
    case SubmitStatus::UnknownAnnotator:
    case SubmitStatus::UnknownDocument:
      return 404;
  }
  return 500;
}

}  // namespace

std::vector<std::string> guideline_rules(const std::string& markdown) {
  std::vector<std::string> rules;
  std::istringstream in(markdown);
  std::string line;
  bool in_rule = false;
  while (std::getline(in, line)) {
    std::size_t digits = 0;
    while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
    if (digits > 0 && line.compare(digits, 2, ". ") == 0) {
      rules.push_back(line.substr(digits + 2));
      in_rule = true;
    } else if (in_rule && !line.empty() && line[0] == ' ') {
      rules.back() += " " + line.substr(line.find_first_not_of(' '));
    } else {
      in_rule = false;
    }
  }
  return rules;
}

AnnotationService::AnnotationService(CorpusStore& store, AnnotationEngine& engine,
                                     ServiceConfig config)
    : store_(store),
      engine_(engine),
      config_(std::move(config)),
      guidelines_(read_text(config_.guidelines_path)),
      schema_(read_text(config_.schema_path)),
      server_(std::make_unique<httplib::Server>()) {}

AnnotationService::~AnnotationService() = default;

HttpResponse AnnotationService::handle(const HttpRequest& request) {
  if (!config_.token.empty() && request.token != config_.token) {
    return error(401, "missing or wrong X-Annotation-Token");
  }
  try {
    if (request.method == "GET") {
      if (request.path == "/api/task") return get_task(request);
      if (request.path == "/api/agreement") return get_agreement();
      if (request.path == "/api/stats") return get_stats();
      if (request.path == "/api/guidelines") return get_guidelines();
      if (request.path == "/api/annotations") return get_annotations();
      if (request.path == "/api/schema") return get_schema();
    } else if (request.method == "POST") {
      if (request.path == "/api/label") return post_label(request);
    }
    return error(404, "no route for " + request.method + " " + request.path);
  } catch (const DataError& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

HttpResponse AnnotationService::get_task(const HttpRequest& request) {
  const auto who = request.params.find("annotator");
  if (who == request.params.end() || who->second.empty()) {
    return error(400, "annotator parameter required");
  }
  int round = 1;
  if (const auto r = request.params.find("round"); r != request.params.end()) {
    if (r->second == "1") round = 1;
    else if (r->second == "2") round = 2;
    else return error(400, "round must be 1 or 2");
  }
  if (!engine_.is_registered(who->second)) {
    return error(404, "unknown annotator '" + who->second + "'");
  }
  const auto task = engine_.next_task(who->second, round);
  if (!task) return {204, "application/json", ""};
  const auto doc = store_.find_document(task->doc_id);
  if (!doc) return error(500, "served document is missing");
  return json_response(200, {{"doc_id", task->doc_id},
                             {"text", doc->raw_text},
                             {"round", task->round},
                             {"probe", task->probe},
                             {"guidelines_version", config_.guidelines_version}});
}

HttpResponse AnnotationService::post_label(const HttpRequest& request) {
  const json body = json::parse(request.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return error(400, "body must be a JSON object");
  LabelSubmission s;
  try {
    s.annotator_id = body.at("annotator_id").get<std::string>();
    s.doc_id = body.at("doc_id").get<std::string>();
    if (body.contains("round")) s.round = body.at("round").get<int>();
    if (body.contains("client_timestamp")) {
      s.client_timestamp = parse_rfc3339(body.at("client_timestamp").get<std::string>());
    }
  } catch (const json::exception& e) {
    return error(400, std::string("malformed submission: ") + e.what());
  }
  const auto label = body.find("label");
  if (label == body.end()) return error(400, "label required");
  if (!label->is_number_integer()) {
    return error(422, "label must be -1, 0 or 1", to_string(SubmitStatus::InvalidLabel));
  }
  s.label = label->get<long long>();

  const SubmitResult result = engine_.submit(s);
  if (result.status != SubmitStatus::Accepted) {
    return error(http_status(result.status), result.message, to_string(result.status));
  }
  json reply{{"status", "accepted"}, {"doc_id", s.doc_id}, {"round", s.round}};
  if (result.adjudication) {
    reply["outcome"] = to_string(result.adjudication->outcome);
    if (const auto& g = result.adjudication->gold) {
      reply["label"] = to_int(g->label);
      reply["provenance"] = to_string(g->provenance);
    }
  }
  return json_response(201, reply);
}

HttpResponse AnnotationService::get_agreement() {
  return {200, "application/json", engine_.agreement().to_json()};
}

HttpResponse AnnotationService::get_stats() {
  const auto docs = store_.documents();
  const auto gold = store_.gold();
  json stats = json::parse(compute_stats(docs, gold).to_json());
  json progress = json::object();
  for (const auto& [state, count] : engine_.state_counts()) progress[to_string(state)] = count;
  stats["progress"] = progress;
  return json_response(200, stats);
}

HttpResponse AnnotationService::get_guidelines() {
  return json_response(200, {{"version", config_.guidelines_version},
                             {"text", guidelines_},
                             {"rules", guideline_rules(guidelines_)}});
}

HttpResponse AnnotationService::get_annotations() {
  std::string body;
  for (const auto& a : store_.annotations()) body += annotation_to_json(a) + "\n";
  return {200, "application/x-ndjson", body};
}

HttpResponse AnnotationService::get_schema() {
  return {200, "application/json", schema_};
}

bool AnnotationService::serve(const std::string& host, int port,
                              const std::function<void(int)>& on_ready) {
  httplib::Server& server = *server_;
  auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [key, value] : req.params) request.params.emplace(key, value);
    request.token = req.get_header_value("X-Annotation-Token");
    request.body = req.body;
    const HttpResponse response = handle(request);
    res.status = response.status;
    if (response.status != 204) res.set_content(response.body, response.content_type);
  };
  server.Get(R"(/api/.*)", adapt);
  server.Post(R"(/api/.*)", adapt);
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Annotation-Token");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  });
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) return false;
  if (on_ready) on_ready(bound);
  return server.listen_after_bind();
}

void AnnotationService::stop() { server_->stop(); }

}  // namespace colloq
