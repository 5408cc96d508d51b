#include "moeforge/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string>

namespace moeforge::log {
namespace {

Level from_env() {
  const char* env = std::getenv("MOEFORGE_LOG");
  if (env == nullptr) return Level::Warn;
  const std::string v(env);
  if (v == "debug") return Level::Debug;
  if (v == "info") return Level::Info;
  if (v == "warn") return Level::Warn;
  if (v == "error") return Level::Error;
  if (v == "off" || v == "quiet") return Level::Off;
  return Level::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

constexpr const char* kNames[] = {"debug", "info", "warn", "error"};

}  // namespace

Level threshold() { return static_cast<Level>(current().load()); }

void set_threshold(Level level) { current().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  if (level == Level::Off || static_cast<int>(level) < current().load()) return;
  std::cerr << "[moeforge " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace moeforge::log
