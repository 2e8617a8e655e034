#include "vcdf/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "vcdf/error.hpp"

namespace vcdf {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double v) {
  if (!std::isfinite(v)) {
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
  }
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || text.empty()) {
    throw Error(ErrorCode::ParseError, where + ": expected a number, got '" + std::string(text) + "'");
  }
  if (!std::isfinite(v)) throw Error(ErrorCode::ParseError, where + ": number is not finite");
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<CsvRecord> parse_csv(std::string_view text) {
  std::vector<CsvRecord> out;
  int line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view row = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty() || row.front() == '#') continue;
    CsvRecord rec;
    rec.line = line;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = row.find(',', start);
      const std::size_t stop = comma == std::string_view::npos ? row.size() : comma;
      rec.fields.emplace_back(row.substr(start, stop - start));
      rec.columns.push_back(static_cast<int>(start) + 1);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw Error(ErrorCode::ShapeMismatch, "row width does not match the header");
  rows.push_back(std::move(row));
}

std::string CsvTable::render(const std::vector<std::string>& comment) const {
  std::string out;
  for (const auto& c : comment) out += "# " + c + "\n";
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out += ',';
      out += fields[k];
    }
    out += '\n';
  };
  emit(columns);
  for (const auto& r : rows) emit(r);
  return out;
}

namespace {

const std::vector<std::string> kTensorColumns = {"subject", "point", "a11", "a21", "a22", "a31", "a32", "a33"};

std::string at(const fs::path& file, const CsvRecord& rec, std::size_t field) {
  return file.filename().string() + ":" + std::to_string(rec.line) + ":" + std::to_string(rec.columns[field]);
}

void expect_width(const fs::path& file, const CsvRecord& rec, std::size_t width) {
  if (rec.fields.size() != width) {
    throw Error(ErrorCode::ParseError, file.filename().string() + ":" + std::to_string(rec.line) + ":1: expected " +
                                           std::to_string(width) + " fields, found " +
                                           std::to_string(rec.fields.size()));
  }
}

std::vector<CsvRecord> load_block(const fs::path& file, const std::vector<std::string>& header) {
  auto records = parse_csv(read_file(file));
  if (records.empty()) throw Error(ErrorCode::ParseError, file.filename().string() + ": missing header row");
  expect_width(file, records.front(), header.size());
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (records.front().fields[k] != header[k]) {
      throw Error(ErrorCode::ParseError, at(file, records.front(), k) + ": expected column '" + header[k] + "', found '" +
                                             records.front().fields[k] + "'");
    }
  }
  records.erase(records.begin());
  for (const auto& r : records) expect_width(file, r, header.size());
  return records;
}

template <typename T>
T header_field(const json& h, const char* key, const fs::path& file) {
  if (!h.contains(key)) throw Error(ErrorCode::ValidationError, file.filename().string() + ": header lacks '" + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ValidationError, file.filename().string() + ": header field '" + key + "' has the wrong type");
  }
}

int index_field(const fs::path& file, const CsvRecord& rec, std::size_t field) {
  const double v = parse_number(rec.fields[field], at(file, rec, field));
  if (v != std::floor(v) || v < 0 || v > 1e9) {
    throw Error(ErrorCode::ParseError, at(file, rec, field) + ": expected a non-negative integer");
  }
  return static_cast<int>(v);
}

}  // namespace

TractDataset load_tract(const fs::path& header_path) {
  const std::string header_name = header_path.filename().string();
  json h;
  try {
    h = json::parse(read_file(header_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, header_name + ": " + e.what());
  }
  if (!h.is_object()) throw Error(ErrorCode::ParseError, header_name + ": header is not a JSON object");
  const auto format = header_field<std::string>(h, "format", header_path);
  if (format != kTractFormat) {
    throw Error(ErrorCode::ValidationError, header_name + ": unsupported format '" + format + "'");
  }
  const int n = header_field<int>(h, "subjects", header_path);
  const int ng = header_field<int>(h, "points", header_path);
  const int r = header_field<int>(h, "covariates", header_path);
  const double length = header_field<double>(h, "length", header_path);
  const auto units = header_field<std::string>(h, "units", header_path);
  const auto names = header_field<std::vector<std::string>>(h, "covariate_names", header_path);
  const auto blocks = header_field<json>(h, "blocks", header_path);
  if (n < 1 || ng < 1 || r < 1) throw Error(ErrorCode::ValidationError, header_name + ": sizes must be positive");
  if (static_cast<int>(names.size()) != r) {
    throw Error(ErrorCode::ValidationError, header_name + ": covariate_names has " + std::to_string(names.size()) +
                                                " entries, header declares r = " + std::to_string(r));
  }
  const fs::path dir = header_path.parent_path();
  const fs::path grid_file = dir / header_field<std::string>(blocks, "grid", header_path);
  const fs::path cov_file = dir / header_field<std::string>(blocks, "covariates", header_path);
  const fs::path tensor_file = dir / header_field<std::string>(blocks, "tensors", header_path);

  const auto grid_rows = load_block(grid_file, {"x"});
  if (static_cast<int>(grid_rows.size()) != ng) {
    throw Error(ErrorCode::ValidationError, grid_file.filename().string() + ": " + std::to_string(grid_rows.size()) +
                                                " grid points, header declares n_G = " + std::to_string(ng));
  }
  std::vector<double> x(static_cast<std::size_t>(ng));
  for (int j = 0; j < ng; ++j) {
    const auto& rec = grid_rows[static_cast<std::size_t>(j)];
    x[static_cast<std::size_t>(j)] = parse_number(rec.fields[0], at(grid_file, rec, 0));
    if (j > 0 && !(x[static_cast<std::size_t>(j)] > x[static_cast<std::size_t>(j) - 1])) {
      throw Error(ErrorCode::ValidationError, at(grid_file, rec, 0) + ": grid is not strictly increasing");
    }
  }
  Grid grid(std::move(x), length);

  const auto cov_rows = load_block(cov_file, names);
  if (static_cast<int>(cov_rows.size()) != n) {
    throw Error(ErrorCode::ValidationError, cov_file.filename().string() + ": " + std::to_string(cov_rows.size()) +
                                                " covariate rows, header declares n = " + std::to_string(n));
  }
  Eigen::MatrixXd z(n, r);
  for (int i = 0; i < n; ++i) {
    const auto& rec = cov_rows[static_cast<std::size_t>(i)];
    for (int l = 0; l < r; ++l) {
      z(i, l) = parse_number(rec.fields[static_cast<std::size_t>(l)], at(cov_file, rec, static_cast<std::size_t>(l)));
    }
  }

  const auto tensor_rows = load_block(tensor_file, kTensorColumns);
  if (static_cast<long>(tensor_rows.size()) != static_cast<long>(n) * ng) {
    throw Error(ErrorCode::ValidationError, tensor_file.filename().string() + ": " +
                                                std::to_string(tensor_rows.size()) + " tensor rows, expected n * n_G = " +
                                                std::to_string(static_cast<long>(n) * ng));
  }
  std::vector<std::vector<TractDataset::Tensor>> tensors(static_cast<std::size_t>(n));
  std::size_t row = 0;
  for (int i = 0; i < n; ++i) {
    tensors[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(ng));
    for (int j = 0; j < ng; ++j, ++row) {
      const auto& rec = tensor_rows[row];
      if (index_field(tensor_file, rec, 0) != i || index_field(tensor_file, rec, 1) != j) {
        throw Error(ErrorCode::ValidationError, at(tensor_file, rec, 0) + ": expected subject " + std::to_string(i) +
                                                    ", point " + std::to_string(j) + " (subject-major order)");
      }
      Vector6<double> e;
      for (int k = 0; k < 6; ++k) {
        e[k] = parse_number(rec.fields[static_cast<std::size_t>(k) + 2], at(tensor_file, rec, static_cast<std::size_t>(k) + 2));
      }
      try {
        tensors[static_cast<std::size_t>(i)].push_back(TractDataset::Tensor::make(SymMat3<double>(e)));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::NotPositiveDefinite) throw;
        throw Error(ErrorCode::NotPositiveDefinite, "subject " + std::to_string(i) + ", point " + std::to_string(j) +
                                                        " (" + at(tensor_file, rec, 2) + "): " + err.what());
      }
    }
  }
  return TractDataset(std::move(grid), std::move(tensors), std::move(z), names, units);
}

std::vector<std::pair<std::string, std::string>> render_tract(const TractDataset& data, const std::string& stem) {
  const std::string grid_name = stem + ".grid.csv";
  const std::string cov_name = stem + ".covariates.csv";
  const std::string tensor_name = stem + ".tensors.csv";

  json h;
  h["format"] = std::string(kTractFormat);
  h["subjects"] = data.subjects();
  h["points"] = data.points();
  h["covariates"] = data.covariate_count();
  h["length"] = data.grid().length();
  h["units"] = data.units();
  h["covariate_names"] = data.covariate_names();
  h["blocks"] = {{"grid", grid_name}, {"covariates", cov_name}, {"tensors", tensor_name}};

  CsvTable grid{{"x"}, {}};
  for (double x : data.grid().points()) grid.add({format_number(x)});

  CsvTable cov{data.covariate_names(), {}};
  for (int i = 0; i < data.subjects(); ++i) {
    std::vector<std::string> row;
    for (int l = 0; l < data.covariate_count(); ++l) row.push_back(format_number(data.covariates()(i, l)));
    cov.add(std::move(row));
  }

  CsvTable tensors{kTensorColumns, {}};
  for (int i = 0; i < data.subjects(); ++i) {
    for (int j = 0; j < data.points(); ++j) {
      std::vector<std::string> row{std::to_string(i), std::to_string(j)};
      const auto& e = data.tensor(i, j).base().entries();
      for (int k = 0; k < 6; ++k) row.push_back(format_number(e[k]));
      tensors.add(std::move(row));
    }
  }
  return {{grid_name, grid.render()},
          {cov_name, cov.render()},
          {tensor_name, tensors.render()},
          {stem + ".json", h.dump(2) + "\n"}};
}

void save_tract(const TractDataset& data, const fs::path& header_path) {
  const fs::path dir = header_path.parent_path();
  const auto files = render_tract(data, header_path.stem().string());
  for (const auto& [name, content] : files) {
    write_file_atomic(name.ends_with(".json") ? header_path : dir / name, content);
  }
}

}  // namespace vcdf
