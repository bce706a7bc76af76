#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "hybrid_orbit/numerics.hpp"

namespace hybrid_orbit {

using Json = nlohmann::json;

// {"rows": r, "cols": c, "data": [row-major entries]}
Json matrix_to_json(const Matrix& m);

// Throws InputError naming `field` when the object is malformed, the entry
// count disagrees with rows*cols, or an entry is not a finite number.
Matrix matrix_from_json(const Json& j, const std::string& field);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& field);

// {"re": x, "im": y}
Json complex_to_json(const Complex& z);

Json spectrum_to_json(const Spectrum& s);

// Parses text, reporting the byte offset of syntax errors.
Json parse_json_text(const std::string& text, const std::string& source_name);

Json read_json_file(const std::string& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomically(const std::string& path, const std::string& contents);

}  // namespace hybrid_orbit
