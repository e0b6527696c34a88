//! Entry-call wrapping for function-call problems.
//!
//! Test inputs arrive as argument tuples. For each supported language the
//! wrapper appends a harness that calls the entry point with the rendered
//! arguments and prints the result through that language's canonical
//! serializer. Every serializer implements the same format (see
//! [`literal`](super::literal)), so outputs compare across languages.

use crate::model::{CandidateProgram, TestInput};

use super::literal::{canonical_float, parse_argument_tuple, quote, ArgValue};
use super::SandboxError;

/// Languages with a built-in wrapper template.
pub fn wrapped_languages() -> [&'static str; 4] {
    ["python", "lua", "cpp", "java"]
}

/// Appends a language-specific harness that calls `entry_point` with the
/// parsed argument tuple and prints the canonical result.
pub fn wrap_entry_call(
    program: &CandidateProgram,
    entry_point: &str,
    input: &TestInput,
) -> Result<String, SandboxError> {
    let args = parse_argument_tuple(&input.payload)?;
    match program.language.as_str() {
        "python" => Ok(wrap_python(&program.source, entry_point, &args)),
        "lua" => Ok(wrap_lua(&program.source, entry_point, &args)),
        "cpp" => Ok(wrap_cpp(&program.source, entry_point, &args)),
        "java" => Ok(wrap_java(&program.source, entry_point, &args)),
        _ => Err(SandboxError::NoWrapperTemplate(program.language.clone())),
    }
}

fn fill(template: &str, candidate: &str, entry: &str, args: &str) -> String {
    template
        .replace("@@CANDIDATE@@", candidate)
        .replace("@@ENTRY@@", entry)
        .replace("@@ARGS@@", args)
}

// ---------------------------------------------------------------- python

const PYTHON_HARNESS: &str = r#"@@CANDIDATE@@

# ---- appended execution harness ----
def __cc_float(v):
    if v != v:
        return "nan"
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    if v == int(v) and abs(v) < 1e16:
        return "%d.0" % int(v)
    s = ""
    for p in range(1, 18):
        s = "%.*g" % (p, v)
        if float(s) == v:
            return s
    return s

def __cc_quote(s):
    out = ['"']
    for c in s:
        if c == '"':
            out.append('\\"')
        elif c == "\\":
            out.append("\\\\")
        elif c == "\n":
            out.append("\\n")
        elif c == "\r":
            out.append("\\r")
        elif c == "\t":
            out.append("\\t")
        else:
            out.append(c)
    out.append('"')
    return "".join(out)

def __cc_show(v, nested):
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return __cc_float(v)
    if isinstance(v, str):
        return __cc_quote(v) if nested else v
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(__cc_show(x, True) for x in v) + "]"
    if isinstance(v, (set, frozenset)):
        return "[" + ", ".join(sorted(__cc_show(x, True) for x in v)) + "]"
    if isinstance(v, dict):
        pairs = sorted((__cc_show(k, True), __cc_show(x, True)) for k, x in v.items())
        return "{" + ", ".join(k + ": " + x for k, x in pairs) + "}"
    return str(v)

import sys as __cc_sys
__cc_result = @@ENTRY@@(@@ARGS@@)
__cc_sys.stdout.write(__cc_show(__cc_result, False))
__cc_sys.stdout.write("\n")
"#;

fn wrap_python(candidate: &str, entry: &str, args: &[ArgValue]) -> String {
    let rendered: Vec<String> = args.iter().map(render_python).collect();
    fill(PYTHON_HARNESS, candidate, entry, &rendered.join(", "))
}

fn render_python(value: &ArgValue) -> String {
    match value {
        ArgValue::Null => "None".to_string(),
        ArgValue::Bool(true) => "True".to_string(),
        ArgValue::Bool(false) => "False".to_string(),
        ArgValue::Int(i) => i.to_string(),
        ArgValue::Float(f) => {
            if f.is_nan() {
                "float(\"nan\")".to_string()
            } else if f.is_infinite() {
                format!("float(\"{}\")", if *f > 0.0 { "inf" } else { "-inf" })
            } else {
                canonical_float(*f)
            }
        }
        ArgValue::Str(s) => quote(s),
        ArgValue::List(items) => {
            let parts: Vec<String> = items.iter().map(render_python).collect();
            format!("[{}]", parts.join(", "))
        }
        ArgValue::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(render_python).collect();
            if parts.len() == 1 {
                format!("({},)", parts[0])
            } else {
                format!("({})", parts.join(", "))
            }
        }
        ArgValue::Map(pairs) => {
            let parts: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("{}: {}", render_python(k), render_python(v)))
                .collect();
            format!("{{{}}}", parts.join(", "))
        }
    }
}

// ------------------------------------------------------------------- lua

const LUA_HARNESS: &str = r#"@@CANDIDATE@@

-- ---- appended execution harness ----
local function __cc_float(v)
  if v ~= v then return "nan" end
  if v == math.huge then return "inf" end
  if v == -math.huge then return "-inf" end
  if v == math.floor(v) and math.abs(v) < 1e16 then
    return string.format("%d.0", v)
  end
  local s = ""
  for p = 1, 17 do
    s = string.format("%." .. p .. "g", v)
    if tonumber(s) == v then return s end
  end
  return s
end

local function __cc_quote(s)
  local out = {'"'}
  for i = 1, #s do
    local c = s:sub(i, i)
    if c == '"' then out[#out + 1] = '\\"'
    elseif c == "\\" then out[#out + 1] = "\\\\"
    elseif c == "\n" then out[#out + 1] = "\\n"
    elseif c == "\r" then out[#out + 1] = "\\r"
    elseif c == "\t" then out[#out + 1] = "\\t"
    else out[#out + 1] = c end
  end
  out[#out + 1] = '"'
  return table.concat(out)
end

local function __cc_show(v, nested)
  if v == nil then return "null" end
  local t = type(v)
  if t == "boolean" then return tostring(v) end
  if t == "number" then
    if math.type then
      if math.type(v) == "integer" then return string.format("%d", v) end
      return __cc_float(v)
    end
    if v == v and v == math.floor(v) and math.abs(v) < 1e16 then
      return string.format("%d", v)
    end
    return __cc_float(v)
  end
  if t == "string" then
    if nested then return __cc_quote(v) end
    return v
  end
  if t == "table" then
    local count = 0
    local max_index = 0
    local is_seq = true
    for k in pairs(v) do
      count = count + 1
      if type(k) == "number" and k == math.floor(k) and k >= 1 then
        if k > max_index then max_index = k end
      else
        is_seq = false
      end
    end
    if is_seq and max_index == count then
      local parts = {}
      for i = 1, max_index do parts[#parts + 1] = __cc_show(v[i], true) end
      return "[" .. table.concat(parts, ", ") .. "]"
    end
    local entries = {}
    for k, val in pairs(v) do
      entries[#entries + 1] = { __cc_show(k, true), __cc_show(val, true) }
    end
    table.sort(entries, function(a, b)
      if a[1] == b[1] then return a[2] < b[2] end
      return a[1] < b[1]
    end)
    local parts = {}
    for _, kv in ipairs(entries) do parts[#parts + 1] = kv[1] .. ": " .. kv[2] end
    return "{" .. table.concat(parts, ", ") .. "}"
  end
  return tostring(v)
end

io.write(__cc_show(@@ENTRY@@(@@ARGS@@), false))
io.write("\n")
"#;

fn wrap_lua(candidate: &str, entry: &str, args: &[ArgValue]) -> String {
    let rendered: Vec<String> = args.iter().map(render_lua).collect();
    fill(LUA_HARNESS, candidate, entry, &rendered.join(", "))
}

fn render_lua(value: &ArgValue) -> String {
    match value {
        ArgValue::Null => "nil".to_string(),
        ArgValue::Bool(b) => b.to_string(),
        ArgValue::Int(i) => i.to_string(),
        ArgValue::Float(f) => {
            if f.is_nan() {
                "(0/0)".to_string()
            } else if f.is_infinite() {
                if *f > 0.0 { "math.huge" } else { "-math.huge" }.to_string()
            } else {
                canonical_float(*f)
            }
        }
        ArgValue::Str(s) => quote(s),
        ArgValue::List(items) | ArgValue::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(render_lua).collect();
            format!("{{{}}}", parts.join(", "))
        }
        ArgValue::Map(pairs) => {
            let parts: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("[{}] = {}", render_lua(k), render_lua(v)))
                .collect();
            format!("{{{}}}", parts.join(", "))
        }
    }
}

// ------------------------------------------------------------------- cpp

const CPP_HARNESS: &str = r#"@@CANDIDATE@@

// ---- appended execution harness ----
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace __cc {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    if (v == std::trunc(v) && std::fabs(v) < 1e16) {
        std::snprintf(buf, sizeof buf, "%lld.0", (long long)v);
        return buf;
    }
    for (int p = 1; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += "\"";
    return out;
}

inline std::string to_text(const std::string& v, bool nested) { return nested ? quote(v) : v; }
inline std::string to_text(const char* v, bool nested) { return to_text(std::string(v), nested); }
inline std::string to_text(char v, bool nested) { return to_text(std::string(1, v), nested); }
inline std::string to_text(bool v, bool) { return v ? "true" : "false"; }
template <class T,
          std::enable_if_t<std::is_integral<T>::value && !std::is_same<T, bool>::value &&
                               !std::is_same<T, char>::value,
                           int> = 0>
std::string to_text(T v, bool) { return std::to_string(v); }
template <class T, std::enable_if_t<std::is_floating_point<T>::value, int> = 0>
std::string to_text(T v, bool) { return fmt_double(static_cast<double>(v)); }
template <class T> std::string to_text(const std::vector<T>& v, bool);
template <class A, class B> std::string to_text(const std::pair<A, B>& v, bool);
template <class K, class V> std::string to_text(const std::map<K, V>& v, bool);
template <class T> std::string to_text(const std::set<T>& v, bool);
template <class T> std::string to_text(const std::optional<T>& v, bool);

template <class T>
std::string to_text(const std::vector<T>& v, bool) {
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += to_text(v[i], true);
    }
    return out + "]";
}

template <class A, class B>
std::string to_text(const std::pair<A, B>& v, bool) {
    return "[" + to_text(v.first, true) + ", " + to_text(v.second, true) + "]";
}

template <class K, class V>
std::string to_text(const std::map<K, V>& v, bool) {
    std::vector<std::pair<std::string, std::string>> parts;
    for (const auto& kv : v) parts.emplace_back(to_text(kv.first, true), to_text(kv.second, true));
    std::sort(parts.begin(), parts.end());
    std::string out = "{";
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i].first + ": " + parts[i].second;
    }
    return out + "}";
}

template <class T>
std::string to_text(const std::set<T>& v, bool) {
    std::vector<std::string> parts;
    for (const auto& x : v) parts.push_back(to_text(x, true));
    std::sort(parts.begin(), parts.end());
    std::string out = "[";
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
    }
    return out + "]";
}

template <class T>
std::string to_text(const std::optional<T>& v, bool nested) {
    return v ? to_text(*v, nested) : std::string("null");
}

}  // namespace __cc

int main() {
    auto __cc_result = @@ENTRY@@(@@ARGS@@);
    std::cout << __cc::to_text(__cc_result, false) << "\n";
    return 0;
}
"#;

fn wrap_cpp(candidate: &str, entry: &str, args: &[ArgValue]) -> String {
    let rendered: Vec<String> = args.iter().map(render_cpp).collect();
    fill(CPP_HARNESS, candidate, entry, &rendered.join(", "))
}

fn render_cpp(value: &ArgValue) -> String {
    match value {
        ArgValue::Null => "nullptr".to_string(),
        ArgValue::Bool(b) => b.to_string(),
        ArgValue::Int(i) => {
            if i32::try_from(*i).is_ok() {
                i.to_string()
            } else {
                format!("{i}LL")
            }
        }
        ArgValue::Float(f) => {
            if f.is_nan() {
                "std::numeric_limits<double>::quiet_NaN()".to_string()
            } else if f.is_infinite() {
                let sign = if *f > 0.0 { "" } else { "-" };
                format!("{sign}std::numeric_limits<double>::infinity()")
            } else {
                canonical_float(*f)
            }
        }
        ArgValue::Str(s) => quote(s),
        ArgValue::List(items) | ArgValue::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(render_cpp).collect();
            format!("{{{}}}", parts.join(", "))
        }
        ArgValue::Map(pairs) => {
            let parts: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("{{{}, {}}}", render_cpp(k), render_cpp(v)))
                .collect();
            format!("{{{}}}", parts.join(", "))
        }
    }
}

// ------------------------------------------------------------------ java

const JAVA_HARNESS: &str = r#"@@CANDIDATE@@

// ---- appended execution harness ----
public class Main {
    static String ccFloat(double v) {
        if (Double.isNaN(v)) return "nan";
        if (Double.isInfinite(v)) return v > 0 ? "inf" : "-inf";
        if (v == Math.floor(v) && Math.abs(v) < 1e16) {
            return (long) v + ".0";
        }
        String s = "";
        for (int p = 1; p <= 17; p++) {
            s = ccTrim(String.format(java.util.Locale.ROOT, "%." + p + "g", v));
            if (Double.parseDouble(s) == v) return s;
        }
        return s;
    }

    static String ccTrim(String s) {
        int e = s.indexOf('e');
        String mantissa = e < 0 ? s : s.substring(0, e);
        String exp = e < 0 ? "" : s.substring(e);
        if (mantissa.contains(".")) {
            mantissa = mantissa.replaceAll("0+$", "");
            if (mantissa.endsWith(".")) mantissa = mantissa.substring(0, mantissa.length() - 1);
        }
        return mantissa + exp;
    }

    static String ccQuote(String s) {
        StringBuilder out = new StringBuilder("\"");
        for (int i = 0; i < s.length(); i++) {
            char c = s.charAt(i);
            switch (c) {
                case '"': out.append("\\\""); break;
                case '\\': out.append("\\\\"); break;
                case '\n': out.append("\\n"); break;
                case '\r': out.append("\\r"); break;
                case '\t': out.append("\\t"); break;
                default: out.append(c);
            }
        }
        return out.append("\"").toString();
    }

    static String ccShow(Object v, boolean nested) {
        if (v == null) return "null";
        if (v instanceof Boolean) return v.toString();
        if (v instanceof Double) return ccFloat((Double) v);
        if (v instanceof Float) return ccFloat(((Float) v).doubleValue());
        if (v instanceof Byte || v instanceof Short || v instanceof Integer || v instanceof Long) {
            return v.toString();
        }
        if (v instanceof Character) {
            String s = v.toString();
            return nested ? ccQuote(s) : s;
        }
        if (v instanceof String) {
            return nested ? ccQuote((String) v) : (String) v;
        }
        if (v instanceof java.util.Map) {
            java.util.List<String[]> parts = new java.util.ArrayList<>();
            for (java.util.Map.Entry<?, ?> entry : ((java.util.Map<?, ?>) v).entrySet()) {
                parts.add(new String[] { ccShow(entry.getKey(), true), ccShow(entry.getValue(), true) });
            }
            parts.sort((a, b) -> {
                int c = a[0].compareTo(b[0]);
                return c != 0 ? c : a[1].compareTo(b[1]);
            });
            StringBuilder out = new StringBuilder("{");
            for (int i = 0; i < parts.size(); i++) {
                if (i > 0) out.append(", ");
                out.append(parts.get(i)[0]).append(": ").append(parts.get(i)[1]);
            }
            return out.append("}").toString();
        }
        if (v instanceof Iterable) {
            StringBuilder out = new StringBuilder("[");
            boolean first = true;
            for (Object x : (Iterable<?>) v) {
                if (!first) out.append(", ");
                first = false;
                out.append(ccShow(x, true));
            }
            return out.append("]").toString();
        }
        if (v.getClass().isArray()) {
            int n = java.lang.reflect.Array.getLength(v);
            StringBuilder out = new StringBuilder("[");
            for (int i = 0; i < n; i++) {
                if (i > 0) out.append(", ");
                out.append(ccShow(java.lang.reflect.Array.get(v, i), true));
            }
            return out.append("]").toString();
        }
        return v.toString();
    }

    public static void main(String[] args) {
        Object result = @@CLASS@@.@@ENTRY@@(@@ARGS@@);
        System.out.print(ccShow(result, false));
        System.out.print("\n");
    }
}
"#;

fn wrap_java(candidate: &str, entry: &str, args: &[ArgValue]) -> String {
    let rendered: Vec<String> = args.iter().map(render_java).collect();
    let class = java_candidate_class(candidate);
    fill(JAVA_HARNESS, candidate, entry, &rendered.join(", ")).replace("@@CLASS@@", &class)
}

/// First declared class that is not `Main`; `Problem` by convention when
/// nothing is found.
fn java_candidate_class(candidate: &str) -> String {
    for line in candidate.lines() {
        let mut tokens = line.split_whitespace().peekable();
        while let Some(token) = tokens.next() {
            if token == "class" {
                if let Some(name) = tokens.peek() {
                    let name: String = name
                        .chars()
                        .take_while(|c| c.is_alphanumeric() || *c == '_')
                        .collect();
                    if !name.is_empty() && name != "Main" {
                        return name;
                    }
                }
            }
        }
    }
    "Problem".to_string()
}

fn render_java(value: &ArgValue) -> String {
    match value {
        ArgValue::Null => "null".to_string(),
        ArgValue::Bool(b) => b.to_string(),
        ArgValue::Int(i) => {
            if i32::try_from(*i).is_ok() {
                i.to_string()
            } else {
                format!("{i}L")
            }
        }
        ArgValue::Float(f) => {
            if f.is_nan() {
                "Double.NaN".to_string()
            } else if f.is_infinite() {
                if *f > 0.0 {
                    "Double.POSITIVE_INFINITY".to_string()
                } else {
                    "Double.NEGATIVE_INFINITY".to_string()
                }
            } else {
                canonical_float(*f)
            }
        }
        ArgValue::Str(s) => quote(s),
        ArgValue::List(items) | ArgValue::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(render_java).collect();
            format!("java.util.List.of({})", parts.join(", "))
        }
        ArgValue::Map(pairs) => {
            if pairs.is_empty() {
                return "java.util.Map.of()".to_string();
            }
            let parts: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("java.util.Map.entry({}, {})", render_java(k), render_java(v)))
                .collect();
            format!("java.util.Map.ofEntries({})", parts.join(", "))
        }
    }
}
