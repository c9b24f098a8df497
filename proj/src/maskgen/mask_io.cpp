#include "sqz/maskgen/mask_io.hpp"

#include <bit>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "sqz/common/error.hpp"

namespace sqz::maskgen {
namespace {

void write_pgm(const PhaseMask& mask, const std::filesystem::path& path, std::string_view comment) {
  const auto& g = mask.geometry;
  const unsigned maxval = g.levels() - 1;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "P5\n";
  if (!comment.empty()) os << "# " << comment << '\n';
  os << g.width_px << ' ' << g.height_px << '\n' << maxval << '\n';
  std::string payload;
  const bool wide = maxval > 255;
  payload.reserve(mask.values.size() * (wide ? 2 : 1));
  for (std::uint16_t v : mask.values) {
    if (wide) payload.push_back(static_cast<char>(v >> 8));
    payload.push_back(static_cast<char>(v & 0xFF));
  }
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

void write_csv(const PhaseMask& mask, const std::filesystem::path& path) {
  const auto& g = mask.geometry;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  std::string line;
  for (int i = 1; i <= g.height_px; ++i) {
    line.clear();
    for (int j = 1; j <= g.width_px; ++j) {
      if (j > 1) line.push_back(',');
      line += std::to_string(mask.at(i, j));
    }
    line.push_back('\n');
    os << line;
  }
  if (!os) throw IoError("write failed: " + path.string());
}

// PGM header tokens may be separated by arbitrary whitespace and '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

PhaseMask read_pgm(const std::filesystem::path& path, double pitch) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  if (next_token(is) != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  PanelGeometry g;
  unsigned long maxval = 0;
  try {
    g.width_px = std::stoi(next_token(is));
    g.height_px = std::stoi(next_token(is));
    maxval = std::stoul(next_token(is));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (maxval == 0 || maxval > 65535) throw IoError(path.string() + ": bad maxval");
  g.bit_depth = std::bit_width(maxval);
  g.pixel_pitch = pitch;
  g.validate();
  PhaseMask mask(g);
  const bool wide = maxval > 255;
  std::string payload(mask.values.size() * (wide ? 2 : 1), '\0');
  is.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (is.gcount() != static_cast<std::streamsize>(payload.size()))
    throw IoError(path.string() + ": truncated pixel payload");
  for (std::size_t p = 0; p < mask.values.size(); ++p) {
    unsigned v = wide ? (static_cast<unsigned char>(payload[2 * p]) << 8) |
                            static_cast<unsigned char>(payload[2 * p + 1])
                      : static_cast<unsigned char>(payload[p]);
    if (v > maxval) throw IoError(path.string() + ": sample exceeds maxval");
    mask.values[p] = static_cast<std::uint16_t>(v);
  }
  return mask;
}

PhaseMask read_csv(const std::filesystem::path& path, int bit_depth, double pitch) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint16_t> values;
  int rows = 0;
  int cols = -1;
  std::string line;
  const long top = (1L << bit_depth) - 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++rows;
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      ++c;
      long v;
      try {
        std::size_t used = 0;
        v = std::stol(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError(path.string() + ": row " + std::to_string(rows) + " column " +
                      std::to_string(c) + ": not an integer");
      }
      if (v < 0 || v > top)
        throw IoError(path.string() + ": row " + std::to_string(rows) + " column " +
                      std::to_string(c) + ": value out of range");
      values.push_back(static_cast<std::uint16_t>(v));
    }
    if (cols < 0) cols = c;
    if (c != cols) throw IoError(path.string() + ": row " + std::to_string(rows) + " has " +
                                 std::to_string(c) + " columns, expected " + std::to_string(cols));
  }
  if (rows == 0) throw IoError(path.string() + ": empty mask file");
  PanelGeometry g{rows, cols, bit_depth, pitch};
  g.validate();
  PhaseMask mask(g);
  mask.values = std::move(values);
  return mask;
}

}  // namespace

MaskFormat parse_mask_format(std::string_view s) {
  if (s == "pgm16" || s == "pgm") return MaskFormat::pgm16;
  if (s == "csv") return MaskFormat::csv;
  throw ConfigError("unknown mask format '" + std::string(s) + "' (expected pgm16|csv)");
}

void export_mask(const PhaseMask& mask, MaskFormat format, const std::filesystem::path& path,
                 std::string_view comment) {
  require(comment.find('\n') == std::string_view::npos, "export_mask: comment must be one line");
  require(mask.values.size() == mask.geometry.pixel_count(), "export_mask: shape mismatch");
  if (format == MaskFormat::pgm16)
    write_pgm(mask, path, comment);
  else
    write_csv(mask, path);
}

PhaseMask import_mask(const std::filesystem::path& path, MaskFormat format, int bit_depth,
                      double pitch) {
  return format == MaskFormat::pgm16 ? read_pgm(path, pitch) : read_csv(path, bit_depth, pitch);
}

}  // namespace sqz::maskgen
