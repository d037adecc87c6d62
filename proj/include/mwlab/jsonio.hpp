#pragma once

// Minimal JSON emitter. All floating-point values are written with 17
// significant digits so that artifacts round-trip bit-exactly and reruns of a
// fixed-seed experiment diff clean.

#include <complex>
#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace mwlab {

class JsonValue;
using JsonArray = std::vector<JsonValue>;

class JsonValue {
 public:
  JsonValue() : v_(nullptr) {}
  JsonValue(std::nullptr_t) : v_(nullptr) {}
  JsonValue(bool b) : v_(b) {}
  JsonValue(int i) : v_(static_cast<long long>(i)) {}
  JsonValue(long long i) : v_(i) {}
  JsonValue(size_t i) : v_(static_cast<long long>(i)) {}
  JsonValue(double d) : v_(d) {}
  JsonValue(const char* s) : v_(std::string(s)) {}
  JsonValue(std::string s) : v_(std::move(s)) {}
  JsonValue(JsonArray a) : v_(std::move(a)) {}

  static JsonValue object() {
    JsonValue j;
    j.v_ = Object{};
    return j;
  }

  JsonValue& operator[](const std::string& key);
  void push_back(JsonValue v);

  std::string dump(int indent = 0) const;

 private:
  // std::map keeps key order deterministic; insertion order is not needed.
  using Object = std::map<std::string, JsonValue>;
  std::variant<std::nullptr_t, bool, long long, double, std::string, JsonArray, Object> v_;

  void write(std::string& out, int indent, int depth) const;
};

std::string format_double(double d);            // %.17g with nan/inf guards
std::string csv_row(const std::vector<std::string>& cells);

}  // namespace mwlab
