#include "gazetrait/checkpoint.hpp"

#include <map>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"

namespace gazetrait::model {

std::string format_checkpoint(const ModelParams<double>& params) {
  std::ostringstream out;
  const auto& d = params.dims;
  out << "gazetrait-checkpoint " << kCheckpointLayoutVersion << '\n';
  out << "dims " << d.input_dim << ' ' << d.hidden_size << ' ' << d.num_layers << ' '
      << d.head_hidden << ' ' << d.num_classes << ' ' << io::format_double(d.dropout) << '\n';
  params.for_each([&out](const std::string& name, const Mat<double>& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out << (j ? " " : "") << io::format_double(m(i, j));
      }
      out << '\n';
    }
  });
  return out.str();
}

ModelParams<double> parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "gazetrait-checkpoint") {
    throw Error(ErrorCode::SchemaMismatch, "not a gazetrait checkpoint");
  }
  if (version != kCheckpointLayoutVersion) {
    throw Error(ErrorCode::SchemaMismatch,
                "unsupported checkpoint layout version " + std::to_string(version));
  }
  ModelDims dims;
  if (!(in >> tag) || tag != "dims" ||
      !(in >> dims.input_dim >> dims.hidden_size >> dims.num_layers >> dims.head_hidden >>
        dims.num_classes >> dims.dropout)) {
    throw Error(ErrorCode::SchemaMismatch, "missing dims record");
  }
  ModelParams<double> params = ModelParams<double>::zeros(dims);
  std::map<std::string, Mat<double>*> slots;
  params.for_each([&slots](const std::string& name, Mat<double>& m) { slots[name] = &m; });

  while (in >> tag) {
    if (tag != "tensor") throw Error(ErrorCode::SchemaMismatch, "unexpected token '" + tag + "'");
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) {
      throw Error(ErrorCode::SchemaMismatch, "truncated tensor header");
    }
    const auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorCode::SchemaMismatch, "unknown tensor '" + name + "'");
    Mat<double>& m = *it->second;
    if (rows != m.rows() || cols != m.cols()) {
      throw Error(ErrorCode::ShapeMismatch,
                  name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", expected " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        std::string cell;
        if (!(in >> cell)) throw Error(ErrorCode::SchemaMismatch, "truncated tensor " + name);
        m(i, j) = io::parse_double(cell, 0);
      }
    }
    slots.erase(it);
  }
  if (!slots.empty()) {
    throw Error(ErrorCode::SchemaMismatch, "missing tensor '" + slots.begin()->first + "'");
  }
  return params;
}

void save_checkpoint(const ModelParams<double>& params, const std::filesystem::path& path) {
  io::write_file(path, format_checkpoint(params));
}

ModelParams<double> load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(io::read_file(path));
}

}  // namespace gazetrait::model
