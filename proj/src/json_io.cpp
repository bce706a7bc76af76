#include "hybrid_orbit/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

namespace {

double finite_number(const Json& j, const std::string& field) {
    if (!j.is_number()) {
        throw InputError(field + ": expected a number, got " + std::string(j.type_name()));
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw InputError(field + ": non-finite entry");
    }
    return v;
}

Eigen::Index dimension(const Json& j, const char* key, const std::string& field) {
    if (!j.contains(key) || !j.at(key).is_number_integer() || j.at(key).get<long long>() < 0) {
        throw InputError(field + "." + key + ": expected a non-negative integer");
    }
    return static_cast<Eigen::Index>(j.at(key).get<long long>());
}

}  // namespace

Matrix matrix_from_json(const Json& j, const std::string& field) {
    if (!j.is_object()) {
        throw InputError(field + ": expected a matrix object {rows, cols, data}");
    }
    const Eigen::Index rows = dimension(j, "rows", field);
    const Eigen::Index cols = dimension(j, "cols", field);
    if (!j.contains("data") || !j.at("data").is_array()) {
        throw InputError(field + ".data: expected an array");
    }
    const Json& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        std::ostringstream os;
        os << field << ".data: expected " << rows * cols << " entries, got " << data.size();
        throw InputError(os.str());
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index k = 0; k < cols; ++k) {
            const auto idx = static_cast<std::size_t>(i * cols + k);
            m(i, k) = finite_number(data[idx], field + ".data[" + std::to_string(idx) + "]");
        }
    }
    return m;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Vector vector_from_json(const Json& j, const std::string& field) {
    if (!j.is_array()) {
        throw InputError(field + ": expected an array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = finite_number(j[i], field + "[" + std::to_string(i) + "]");
    }
    return v;
}

Json complex_to_json(const Complex& z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

Json spectrum_to_json(const Spectrum& s) {
    Json out = Json::array();
    for (const auto& z : s.values) {
        out.push_back(complex_to_json(z));
    }
    return out;
}

Json parse_json_text(const std::string& text, const std::string& source_name) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t end = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        std::ostringstream os;
        os << source_name << ":" << line << ":" << column << ": malformed JSON (" << e.what()
           << ")";
        throw InputError(os.str());
    }
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_json_text(buffer.str(), path);
}

void write_file_atomically(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InputError("cannot write " + tmp.string());
        }
        out << contents;
        out.flush();
        if (!out) {
            throw InputError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw InputError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
    }
}

}  // namespace hybrid_orbit
