#include "gridbench/canonical_json.hpp"

#include <cmath>

#include "gridbench/common.hpp"
#include "gridbench/data.hpp"

namespace gridbench {

namespace {

void indent(std::string& out, int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }

void write(std::string& out, const nlohmann::json& value, int depth) {
  using value_t = nlohmann::json::value_t;
  switch (value.type()) {
    case value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      // nlohmann::json stores objects in a std::map, so iteration is sorted.
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        indent(out, depth + 1);
        out += nlohmann::json(it.key()).dump();
        out += ": ";
        write(out, it.value(), depth + 1);
      }
      out += "\n";
      indent(out, depth);
      out += "}";
      return;
    }
    case value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out += ",\n";
        indent(out, depth + 1);
        write(out, value[i], depth + 1);
      }
      out += "\n";
      indent(out, depth);
      out += "]";
      return;
    }
    case value_t::number_float: {
      double v = value.get<double>();
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidSpec, "non-finite number in document");
      out += data::format_number(v);
      return;
    }
    default:
      out += value.dump();
  }
}

}  // namespace

std::string canonical_dump(const nlohmann::json& doc) {
  std::string out;
  write(out, doc, 0);
  out.push_back('\n');
  return out;
}

}  // namespace gridbench
