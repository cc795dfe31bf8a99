#include <gtest/gtest.h>

#include <unistd.h>

#include <fstream>
#include <future>
#include <set>

#include "golden.hpp"
#include "live_server.hpp"

using namespace healthcam;
namespace fs = std::filesystem;

namespace {

RuleTable shipped() { return load_rules(std::string(HEALTHCAM_CONFIG) + "/rules.json"); }

const golden::Case& find_case(const std::string& name) {
  for (const auto& c : golden::cases())
    if (c.name == name) return c;
  throw std::out_of_range(name);
}

nlohmann::json recorded(const std::string& name) {
  static const nlohmann::json doc = golden::load_responses();
  for (const auto& e : doc.at("cases"))
    if (e.at("name") == name) return e;
  throw std::out_of_range(name);
}

}  // namespace

TEST(Golden, HandlersReproduceRecordedResponses) {
  const auto snap = load_snapshot(golden::checkpoint_path());
  const auto rules = shipped();
  const auto doc = golden::load_responses();
  ASSERT_EQ(doc.at("cases").size(), golden::cases().size());
  for (const auto& c : golden::cases()) {
    const auto want = recorded(c.name);
    const auto got = golden::run(c, snap, rules);
    EXPECT_EQ(got.status, want.at("status").get<int>()) << c.name;
    EXPECT_EQ(golden::diff(want.at("body"), golden::without_latency(got.body)), "") << c.name;
  }
}

TEST(Golden, HttpReproducesRecordedResponses) {
  live::Server server(shipped());
  server.service().load(golden::checkpoint_path());
  auto client = server.client();
  for (const auto& c : golden::cases()) {
    const auto res = live::post(client, c);
    ASSERT_TRUE(res) << c.name;
    const auto want = recorded(c.name);
    EXPECT_EQ(res->status, want.at("status").get<int>()) << c.name;
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
    EXPECT_EQ(golden::diff(want.at("body"), golden::without_latency(nlohmann::json::parse(res->body))), "") << c.name;
  }
}

TEST(Golden, RecordedExpectationsHold) {
  // The recorded bodies themselves satisfy the endpoint examples.
  EXPECT_EQ(recorded("recommend_clear_none")["body"]["recommendation"]["verdict"], "Suitable");
  EXPECT_EQ(recorded("recommend_hazy_asthma")["body"]["recommendation"]["verdict"], "Unsuitable");
  const auto typo = recorded("recommend_unknown_symptom");
  EXPECT_EQ(typo["status"], 422);
  EXPECT_EQ(typo["body"]["error"]["details"]["token"], "typo");
  const auto dot = recorded("predict_one_pixel");
  EXPECT_EQ(dot["status"], 400);
  EXPECT_EQ(dot["body"]["error"]["message"], "image too small");
  EXPECT_EQ(recorded("predict_text_file")["status"], 400);
  // Haze at full opacity sits near the top of the trained PM2.5 range (0..250).
  const double hazy_pm25 = recorded("predict_hazy_png")["body"]["pollutants"][0]["value"];
  const double clear_pm25 = recorded("predict_clear_png")["body"]["pollutants"][0]["value"];
  EXPECT_GT(hazy_pm25, 0.75 * 250);
  EXPECT_LT(clear_pm25, 0.25 * 250);
}

TEST(Service, EveryErrorCarriesCodeAndMessage) {
  live::Server server(shipped());
  auto client = server.client();
  // No checkpoint yet.
  auto r = live::post(client, find_case("predict_clear_png"));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 503);
  EXPECT_EQ(nlohmann::json::parse(r->body)["error"]["code"], "no_checkpoint");
  r = client.Get("/api/model");
  EXPECT_EQ(r->status, 503);
  r = client.Get("/api/nowhere");
  EXPECT_EQ(r->status, 404);
  auto body = nlohmann::json::parse(r->body);
  EXPECT_EQ(body["error"]["code"], "not_found");
  EXPECT_FALSE(body["error"]["message"].get<std::string>().empty());

  server.service().load(golden::checkpoint_path());
  for (const auto& c : golden::cases()) {
    r = live::post(client, c);
    ASSERT_TRUE(r);
    if (r->status >= 400) {
      body = nlohmann::json::parse(r->body);
      EXPECT_TRUE(body["error"]["code"].is_string()) << c.name;
      EXPECT_TRUE(body["error"]["message"].is_string()) << c.name;
    }
  }
}

TEST(Service, OversizeUploadIs413) {
  live::Server server(shipped());
  server.service().load(golden::checkpoint_path());
  auto client = server.client();
  // Just over the limit, within the multipart slack: rejected by the handler.
  std::string big(kMaxUploadBytes + 1, '\x89');
  auto r = client.Post("/api/predict", httplib::MultipartFormDataItems{{"image", big, "big.png", "image/png"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 413);
  EXPECT_EQ(nlohmann::json::parse(r->body)["error"]["code"], "payload_too_large");
  // Far over: rejected by the transport before the handler runs.
  big.assign(kMaxUploadBytes + (3u << 20), 'x');
  r = client.Post("/api/recommend", httplib::MultipartFormDataItems{{"image", big, "big.png", "image/png"}});
  if (r) {
    EXPECT_EQ(r->status, 413);
    EXPECT_EQ(nlohmann::json::parse(r->body)["error"]["code"], "payload_too_large");
  }
  // Direct handler check, independent of transport.
  std::vector<std::uint8_t> bytes(kMaxUploadBytes + 1);
  EXPECT_EQ(handle_predict(server.service().snapshot(), std::span<const std::uint8_t>(bytes), {}).status, 413);
}

TEST(Service, HealthAndModelEndpoints) {
  live::Server server(shipped());
  auto client = server.client();
  auto h = nlohmann::json::parse(client.Get("/api/health")->body);
  EXPECT_EQ(h["status"], "degraded");
  EXPECT_EQ(h["checkpoint_loaded"], false);

  const std::string hash = server.service().load(golden::checkpoint_path());
  h = nlohmann::json::parse(client.Get("/api/health")->body);
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["checkpoint_hash"], hash);

  const auto m = nlohmann::json::parse(client.Get("/api/model")->body);
  EXPECT_EQ(m["checkpoint_hash"], hash);
  EXPECT_EQ(m["architecture"], "branched");
  EXPECT_EQ(m["input"]["height"], 32);
  EXPECT_EQ(m["pollutants"].size(), kPollutantCount);
  EXPECT_TRUE(m["scaler"].is_object());
  EXPECT_EQ(m["symptoms"].size(), kSymptomVocabulary.size());
}

TEST(Service, ModelEndpointEchoesFullInputContract) {
  const auto path = fs::temp_directory_path() / ("healthcam_full_" + std::to_string(::getpid()) + ".ckpt");
  std::vector<PollutantVector> labels(2);
  for (std::size_t i = 0; i < kPollutantCount; ++i) labels[1][i] = 1.0 + static_cast<double>(i);
  save_checkpoint(Model::build(ModelConfig::full(), 1), LabelScaler::fit(labels), path);
  const auto m = handle_model(load_snapshot(path), shipped()).body;
  EXPECT_EQ(m["input"], (nlohmann::json{{"height", 224}, {"width", 224}, {"channels", 3}}));
  EXPECT_EQ(m["parameter_count"], 5594695u);
  fs::remove(path);
}

TEST(Service, CorsHeadersAndPreflight) {
  live::Server server(shipped(), "http://dash.local");
  auto client = server.client();
  auto r = client.Get("/api/health");
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "http://dash.local");
  r = client.Options("/api/predict");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 204);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "http://dash.local");
  EXPECT_NE(r->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST(Service, RepeatedAndConcurrentRequestsAgree) {
  live::Server server(shipped());
  server.service().load(golden::checkpoint_path());
  const auto& c = find_case("recommend_hazy_asthma");
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 6; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      auto client = server.client();
      auto r = live::post(client, c);
      return r ? golden::without_latency(nlohmann::json::parse(r->body)).dump() : std::string("no response");
    }));
  }
  const std::string first = futures[0].get();
  for (std::size_t i = 1; i < futures.size(); ++i) EXPECT_EQ(futures[i].get(), first);
}

TEST(Service, ValuesRoundTripThroughTheScaler) {
  const auto snap = load_snapshot(golden::checkpoint_path());
  const auto bytes = golden::request_bytes(find_case("predict_hazy_png"));
  const auto body = handle_predict(snap, std::span<const std::uint8_t>(*bytes), {}).body;
  PollutantVector native;
  for (std::size_t i = 0; i < kPollutantCount; ++i) native[i] = body["pollutants"][i]["value"];
  const auto back = snap->checkpoint.scaler.scale(native);
  for (std::size_t i = 0; i < kPollutantCount; ++i) {
    EXPECT_NEAR(back[i], body["pollutants"][i]["normalized"].get<double>(), 1e-5) << i;
  }
}

TEST(Service, HotReloadSwapsSnapshotAndKeepsOldOnFailure) {
  const auto dir = fs::temp_directory_path() / ("healthcam_reload_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto path = dir / "model.ckpt";
  fs::copy_file(golden::checkpoint_path(), path, fs::copy_options::overwrite_existing);

  live::Server server(shipped());
  const std::string first = server.service().load(path);
  const auto held = server.service().snapshot();

  auto ckpt = load_checkpoint(path);
  ckpt.model.mutable_parameter_blocks()[0][0] += 0.5f;
  const std::string second = save_checkpoint(ckpt.model, ckpt.scaler, path);
  ASSERT_NE(first, second);
  EXPECT_EQ(server.service().reload(), second);
  EXPECT_EQ(server.service().snapshot()->checkpoint.hash, second);
  EXPECT_EQ(held->checkpoint.hash, first) << "requests in flight keep their snapshot";

  std::ofstream(path, std::ios::binary | std::ios::trunc) << "garbage";
  EXPECT_THROW(server.service().reload(), CheckpointError);
  EXPECT_EQ(server.service().snapshot()->checkpoint.hash, second);
  fs::remove_all(dir);
}

TEST(Service, LogsOneJsonLinePerRequest) {
  live::Server server(shipped());
  auto client = server.client();
  client.Get("/api/health");
  client.Get("/api/model");
  server.stop();
  std::istringstream lines(server.log());
  std::string line;
  std::vector<nlohmann::json> entries;
  while (std::getline(lines, line)) entries.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0]["method"], "GET");
  EXPECT_EQ(entries[0]["path"], "/api/health");
  EXPECT_EQ(entries[0]["status"], 200);
  EXPECT_EQ(entries[1]["status"], 503);
  EXPECT_TRUE(entries[1]["latency_ms"].is_number());
}

namespace {

std::set<std::string> keys_of(const nlohmann::json& obj) {
  std::set<std::string> out;
  for (const auto& [k, v] : obj.items()) out.insert(k);
  return out;
}

}  // namespace

TEST(Schema, ResponsesCarryExactlyTheDocumentedFields) {
  std::ifstream in(std::string(HEALTHCAM_CONFIG) + "/../docs/api.schema.json");
  ASSERT_TRUE(in);
  const auto defs = nlohmann::json::parse(in).at("$defs");
  auto documented = [&](const char* name) { return keys_of(defs.at(name).at("properties")); };

  const auto snap = load_snapshot(golden::checkpoint_path());
  const auto rules = shipped();
  EXPECT_EQ(keys_of(handle_health(snap).body), documented("health"));
  EXPECT_EQ(keys_of(handle_health(nullptr).body), documented("health"));
  EXPECT_EQ(keys_of(handle_model(snap, rules).body), documented("model"));
  EXPECT_EQ(keys_of(handle_model(nullptr, rules).body), documented("error"));

  const std::set<std::string> codes = [&] {
    std::set<std::string> s;
    for (const auto& c : defs.at("error").at("properties").at("error").at("properties").at("code").at("enum"))
      s.insert(c.get<std::string>());
    return s;
  }();
  for (const auto& c : golden::cases()) {
    const auto r = golden::run(c, snap, rules);
    if (r.status != 200) {
      EXPECT_EQ(keys_of(r.body), documented("error")) << c.name;
      EXPECT_TRUE(codes.count(r.body["error"]["code"].get<std::string>())) << c.name;
      continue;
    }
    EXPECT_EQ(keys_of(r.body), documented(c.endpoint.c_str())) << c.name;
    EXPECT_EQ(keys_of(r.body["pollutants"][0]), keys_of(defs.at("pollutant_reading").at("properties")));
    if (c.endpoint == "recommend") {
      EXPECT_EQ(keys_of(r.body["recommendation"]),
                keys_of(defs.at("recommend").at("properties").at("recommendation").at("properties")));
      for (const auto& t : r.body["recommendation"]["triggered_rules"])
        EXPECT_EQ(keys_of(t), keys_of(defs.at("triggered_rule").at("properties")));
    }
  }
}
