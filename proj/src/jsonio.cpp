#include "mwlab/jsonio.hpp"

#include <cmath>
#include <stdexcept>

namespace mwlab {

std::string format_double(double d) {
  if (std::isnan(d)) return "null";
  if (std::isinf(d)) return d > 0 ? "1e999" : "-1e999";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

namespace {

void write_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void newline_indent(std::string& out, int indent, int depth) {
  if (indent <= 0) return;
  out += '\n';
  out.append(static_cast<size_t>(indent) * depth, ' ');
}

}  // namespace

JsonValue& JsonValue::operator[](const std::string& key) {
  if (!std::holds_alternative<Object>(v_)) v_ = Object{};
  return std::get<Object>(v_)[key];
}

void JsonValue::push_back(JsonValue v) {
  if (!std::holds_alternative<JsonArray>(v_)) v_ = JsonArray{};
  std::get<JsonArray>(v_).push_back(std::move(v));
}

void JsonValue::write(std::string& out, int indent, int depth) const {
  if (std::holds_alternative<std::nullptr_t>(v_)) {
    out += "null";
  } else if (std::holds_alternative<bool>(v_)) {
    out += std::get<bool>(v_) ? "true" : "false";
  } else if (std::holds_alternative<long long>(v_)) {
    out += std::to_string(std::get<long long>(v_));
  } else if (std::holds_alternative<double>(v_)) {
    out += format_double(std::get<double>(v_));
  } else if (std::holds_alternative<std::string>(v_)) {
    write_escaped(out, std::get<std::string>(v_));
  } else if (std::holds_alternative<JsonArray>(v_)) {
    const auto& a = std::get<JsonArray>(v_);
    out += '[';
    for (size_t i = 0; i < a.size(); ++i) {
      if (i) out += ',';
      newline_indent(out, indent, depth + 1);
      a[i].write(out, indent, depth + 1);
    }
    if (!a.empty()) newline_indent(out, indent, depth);
    out += ']';
  } else {
    const auto& o = std::get<Object>(v_);
    out += '{';
    bool first = true;
    for (const auto& [k, val] : o) {
      if (!first) out += ',';
      first = false;
      newline_indent(out, indent, depth + 1);
      write_escaped(out, k);
      out += indent > 0 ? ": " : ":";
      val.write(out, indent, depth + 1);
    }
    if (!o.empty()) newline_indent(out, indent, depth);
    out += '}';
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  write(out, indent, 0);
  return out;
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
  return out;
}

}  // namespace mwlab
