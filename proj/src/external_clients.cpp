#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "s2s/tools.hpp"

namespace s2s {

using nlohmann::json;

namespace {

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

std::string trim(const std::string& text) {
  auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = text.find_last_not_of(" \t\r\n");
  return text.substr(b, e - b + 1);
}

std::optional<std::string> env(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

// Fixture files map lower-cased lookup keys to canned payloads.
ToolOutput stub_lookup(const std::filesystem::path& file, const std::string& key, std::string_view what) {
  std::ifstream in(file);
  if (!in) return ToolOutput::error(std::string(what) + " fixture file " + file.string() + " is missing");
  json fixtures = json::parse(in, nullptr, false);
  if (fixtures.is_discarded() || !fixtures.is_object())
    return ToolOutput::error(std::string(what) + " fixture file " + file.string() + " is not a JSON object");
  const std::string wanted = lower(trim(key));
  for (const auto& [name, payload] : fixtures.items())
    if (lower(name) == wanted && payload.is_string()) return ToolOutput::ok(payload.get<std::string>());
  return ToolOutput::error("no " + std::string(what) + " data for '" + key + "'");
}

httplib::Client make_client(const ServiceConfig& service, std::chrono::milliseconds timeout) {
  httplib::Client client(service.endpoint);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  return client;
}

}  // namespace

std::string_view to_string(ServiceMode mode) { return mode == ServiceMode::Live ? "live" : "stub"; }

std::optional<ServiceMode> parse_service_mode(std::string_view text) {
  if (text == "live") return ServiceMode::Live;
  if (text == "stub") return ServiceMode::Stub;
  return std::nullopt;
}

ExternalClientConfig ExternalClientConfig::from_environment(ServiceMode weather_mode, ServiceMode search_mode,
                                                            std::filesystem::path fixtures_dir) {
  ExternalClientConfig config;
  config.weather.mode = weather_mode;
  config.search.mode = search_mode;
  config.weather.key = env("WEATHER_KEY");
  config.search.key = env("SEARCH_KEY");
  config.fixtures_dir = std::move(fixtures_dir);
  return config;
}

ExternalServices::ExternalServices(ExternalClientConfig config) : config_(std::move(config)) {}

ToolOutput ExternalServices::weather(const std::string& location) const {
  if (config_.weather.mode == ServiceMode::Stub)
    return stub_lookup(config_.fixtures_dir / "weather.json", location, "weather");
  if (!config_.weather.key) return ToolOutput::error("weather service unavailable: missing key (set WEATHER_KEY)");
  try {
    auto client = make_client(config_.weather, config_.timeout);
    httplib::Params params{{"q", location}, {"appid", *config_.weather.key}, {"units", "metric"}};
    auto res = client.Get("/data/2.5/weather", params, httplib::Headers{});
    if (!res) return ToolOutput::error("weather request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      return ToolOutput::error("weather service returned HTTP " + std::to_string(res->status));
    json body = json::parse(res->body);
    std::ostringstream out;
    out << body.value("name", location) << ": " << body.at("main").at("temp").get<double>() << " °C";
    if (body.contains("weather") && !body["weather"].empty())
      out << ", " << body["weather"][0].value("description", "");
    if (body.contains("wind")) out << ", wind " << body["wind"].value("speed", 0.0) << " m/s";
    return ToolOutput::ok(out.str());
  } catch (const std::exception& e) {
    return ToolOutput::error(std::string("weather response unreadable: ") + e.what());
  }
}

ToolOutput ExternalServices::search(const std::string& query) const {
  if (config_.search.mode == ServiceMode::Stub)
    return stub_lookup(config_.fixtures_dir / "search.json", query, "search");
  if (!config_.search.key) return ToolOutput::error("search service unavailable: missing key (set SEARCH_KEY)");
  try {
    auto client = make_client(config_.search, config_.timeout);
    json request = {{"api_key", *config_.search.key}, {"query", query}, {"max_results", 3}};
    auto res = client.Post("/search", request.dump(), "application/json");
    if (!res) return ToolOutput::error("search request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) return ToolOutput::error("search service returned HTTP " + std::to_string(res->status));
    json body = json::parse(res->body);
    std::string out;
    if (body.contains("answer") && body["answer"].is_string()) out = body["answer"].get<std::string>();
    for (const auto& r : body.value("results", json::array())) {
      if (!out.empty()) out += "\n";
      out += "- " + r.value("title", std::string()) + ": " + r.value("content", std::string());
    }
    return out.empty() ? ToolOutput::error("search returned no results") : ToolOutput::ok(out);
  } catch (const std::exception& e) {
    return ToolOutput::error(std::string("search response unreadable: ") + e.what());
  }
}

}  // namespace s2s
