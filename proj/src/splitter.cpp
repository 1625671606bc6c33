#include "tracerag/splitter.hpp"

#include "tracerag/util.hpp"

#include <algorithm>
#include <map>
#include <optional>

namespace tracerag::splitter {

namespace {

enum class Tok { ident, punct, annotation, at_interface, literal, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;

    bool is(char c) const { return kind == Tok::punct && text.size() == 1 && text[0] == c; }
    bool is_word(std::string_view w) const { return kind == Tok::ident && text == w; }
};

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
           static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_char(char c) {
    return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

// Decompiler-tolerant lexer: comments and whitespace vanish, string/char
// literals are opaque, annotations are consumed as single tokens so their
// argument lists cannot confuse the structure scan.
class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_trivia();
        if (pos_ >= src_.size()) {
            return {Tok::end, "", pos_, pos_};
        }
        const std::size_t start = pos_;
        char c = src_[pos_];
        if (c == '"') {
            lex_string();
            return {Tok::literal, "\"\"", start, pos_};
        }
        if (c == '\'') {
            lex_char();
            return {Tok::literal, "''", start, pos_};
        }
        if (c == '@') {
            return lex_annotation(start);
        }
        if (is_ident_start(c)) {
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            return {Tok::ident, std::string(src_.substr(start, pos_ - start)), start, pos_};
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            lex_number();
            return {Tok::literal, "0", start, pos_};
        }
        ++pos_;
        return {Tok::punct, std::string(1, c), start, pos_};
    }

private:
    void skip_trivia() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (static_cast<unsigned char>(c) == 0xEF && pos_ + 2 < src_.size() &&
                       static_cast<unsigned char>(src_[pos_ + 1]) == 0xBB &&
                       static_cast<unsigned char>(src_[pos_ + 2]) == 0xBF) {
                pos_ += 3; // UTF-8 BOM
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                pos_ += 2;
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) ++pos_;
                pos_ = std::min(pos_ + 2, src_.size());
            } else {
                break;
            }
        }
    }

    void lex_string() {
        // Text blocks ("""...""") appear in modern decompiler output.
        if (pos_ + 2 < src_.size() && src_.substr(pos_, 3) == "\"\"\"") {
            pos_ += 3;
            while (pos_ + 2 < src_.size() && src_.substr(pos_, 3) != "\"\"\"") ++pos_;
            pos_ = std::min(pos_ + 3, src_.size());
            return;
        }
        ++pos_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                pos_ += 2;
            } else if (c == '"' || c == '\n') {
                ++pos_;
                return;
            } else {
                ++pos_;
            }
        }
    }

    void lex_char() {
        ++pos_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                pos_ += 2;
            } else if (c == '\'' || c == '\n') {
                ++pos_;
                return;
            } else {
                ++pos_;
            }
        }
    }

    void lex_number() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
                ++pos_;
            } else if ((c == '+' || c == '-') && pos_ > 0 &&
                       (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E' || src_[pos_ - 1] == 'p' ||
                        src_[pos_ - 1] == 'P')) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    Token lex_annotation(std::size_t start) {
        ++pos_; // '@'
        skip_trivia();
        std::size_t name_start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        std::string name(src_.substr(name_start, pos_ - name_start));
        if (name == "interface") {
            return {Tok::at_interface, "@interface", start, pos_};
        }
        // qualified annotation names: @a.b.C
        while (true) {
            std::size_t save = pos_;
            skip_trivia();
            if (pos_ < src_.size() && src_[pos_] == '.') {
                ++pos_;
                skip_trivia();
                while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            } else {
                pos_ = save;
                break;
            }
        }
        std::size_t save = pos_;
        skip_trivia();
        if (pos_ < src_.size() && src_[pos_] == '(') {
            int depth = 0;
            while (pos_ < src_.size()) {
                Token t = next();
                if (t.kind == Tok::end) break;
                if (t.is('(')) ++depth;
                if (t.is(')')) {
                    --depth;
                    if (depth == 0) break;
                }
            }
        } else {
            pos_ = save;
        }
        return {Tok::annotation, "@" + name, start, pos_};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------

struct TypeNode {
    int parent = -1;
    std::string simple_name;
    std::string decl_line;
    bool is_enum = false;
    std::vector<std::string> fields; // source order
};

struct PendingUnit {
    int type_node = -1;
    std::string method_name;
    std::vector<std::string> param_types;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Member {
    std::vector<Token> tokens;
    std::size_t begin = 0;
    int paren_depth = 0;
    bool saw_top_eq = false;
    std::size_t first_eq_begin = 0;
    bool saw_paren_before_eq = false;
    bool saw_init_brace = false;

    bool empty() const { return tokens.empty(); }
    void clear() { *this = Member{}; }

    void add(const Token& t) {
        if (tokens.empty()) begin = t.begin;
        if (t.is('(')) {
            if (paren_depth == 0 && !saw_top_eq) saw_paren_before_eq = true;
            ++paren_depth;
        } else if (t.is(')')) {
            if (paren_depth > 0) --paren_depth;
        } else if (t.is('=') && paren_depth == 0 && !saw_top_eq) {
            saw_top_eq = true;
            first_eq_begin = t.begin;
        }
        tokens.push_back(t);
    }
};

struct Scope {
    enum class Kind { file, type, method, block, skip };
    Kind kind = Kind::block;
    int type_node = -1;        // for type scopes
    bool enum_constants = false; // inside an enum, before the constants ';'
    bool resume_member = false;  // skip scope inside a field initializer
    // method scopes carry the pending unit until their brace closes
    PendingUnit unit;
};

std::string squash_ws(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = false;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

// Renders a type's token range as written, minus decorative whitespace.
std::string render_type(std::string_view src, const std::vector<Token>& toks, std::size_t from,
                        std::size_t to) {
    if (from >= to) return "";
    std::string raw = squash_ws(src.substr(toks[from].begin, toks[to - 1].end - toks[from].begin));
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == ' ') {
            char prev = out.empty() ? '\0' : out.back();
            char next = i + 1 < raw.size() ? raw[i + 1] : '\0';
            auto tight = [](char x) {
                return x == '<' || x == '>' || x == '[' || x == ']' || x == '.' || x == ',' ||
                       x == '?' || x == '&';
            };
            if (tight(prev) || tight(next)) continue;
        }
        out.push_back(c);
    }
    return out;
}

struct FileScan {
    explicit FileScan(const SourceFile& f) : file(f), lexer(f.text) {}

    const SourceFile& file;
    Lexer lexer;
    std::vector<Scope> scopes;
    std::vector<Member> members; // parallel to scopes; used by file/type scopes
    std::vector<TypeNode> types;
    std::vector<PendingUnit> units;
    std::string package_line;
    std::string package_name;
    std::vector<std::string> import_lines;
    bool balanced = true;

    bool run() {
        scopes.push_back({Scope::Kind::file});
        members.emplace_back();
        while (true) {
            Token t = lexer.next();
            if (t.kind == Tok::end) break;
            Scope& top = scopes.back();
            if (top.kind == Scope::Kind::file || top.kind == Scope::Kind::type) {
                if (t.is(';')) {
                    flush_member(t.end);
                } else if (t.is('{')) {
                    open_scope(t);
                } else if (t.is('}')) {
                    if (!close_scope(t)) return false;
                } else {
                    members.back().add(t);
                }
            } else {
                if (t.is('{')) {
                    scopes.push_back({Scope::Kind::block});
                    members.emplace_back();
                } else if (t.is('}')) {
                    if (!close_scope(t)) return false;
                }
            }
        }
        if (scopes.size() != 1) {
            balanced = false;
            return false;
        }
        return true;
    }

    void flush_member(std::size_t semi_end) {
        Member& m = members.back();
        Scope& top = scopes.back();
        if (m.empty()) {
            return;
        }
        if (top.kind == Scope::Kind::file) {
            if (m.tokens.front().is_word("package")) {
                package_line = util::trim(text_span(m.begin, semi_end));
                if (m.tokens.size() >= 2) {
                    std::string joined;
                    for (std::size_t i = 1; i < m.tokens.size(); ++i) joined += m.tokens[i].text;
                    package_name = joined;
                }
            } else if (m.tokens.front().is_word("import")) {
                // kept verbatim; headers must carry imports exactly as written
                import_lines.push_back(util::trim(text_span(m.begin, semi_end)));
            }
            m.clear();
            return;
        }
        // type scope
        if (top.enum_constants) {
            top.enum_constants = false;
            m.clear();
            return;
        }
        if (m.saw_paren_before_eq) {
            // bodiless declaration (abstract/native/interface signature)
            m.clear();
            return;
        }
        std::string field;
        if (m.saw_init_brace) {
            field = squash_ws(text_span(m.begin, m.first_eq_begin)) + ";";
        } else {
            field = squash_ws(text_span(m.begin, semi_end));
        }
        if (!field.empty() && field != ";") {
            types[static_cast<std::size_t>(top.type_node)].fields.push_back(field);
        }
        m.clear();
    }

    void open_scope(const Token& brace) {
        Member& m = members.back();
        Scope& top = scopes.back();

        if (top.kind == Scope::Kind::type && top.enum_constants) {
            scopes.push_back({Scope::Kind::skip});
            scopes.back().resume_member = true;
            members.emplace_back();
            return;
        }
        if (m.saw_top_eq) {
            m.saw_init_brace = true;
            scopes.push_back({Scope::Kind::skip});
            scopes.back().resume_member = true;
            members.emplace_back();
            return;
        }
        if (auto type_kw = find_type_decl(m)) {
            Scope s{Scope::Kind::type};
            TypeNode node;
            node.parent = top.kind == Scope::Kind::type ? top.type_node : -1;
            node.simple_name = type_kw->second;
            node.is_enum = type_kw->first == "enum";
            node.decl_line = squash_ws(text_span(m.begin, brace.begin)) + " {";
            types.push_back(std::move(node));
            s.type_node = static_cast<int>(types.size()) - 1;
            s.enum_constants = types.back().is_enum;
            m.clear();
            scopes.push_back(s);
            members.emplace_back();
            return;
        }
        if (auto method = match_method(m)) {
            Scope s{Scope::Kind::method};
            s.unit = std::move(*method);
            s.unit.type_node = top.kind == Scope::Kind::type ? top.type_node : -1;
            s.unit.begin = m.begin;
            m.clear();
            scopes.push_back(s);
            members.emplace_back();
            return;
        }
        // initializer block / unknown member shape
        m.clear();
        scopes.push_back({Scope::Kind::block});
        members.emplace_back();
    }

    bool close_scope(const Token& brace) {
        if (scopes.size() == 1) {
            balanced = false;
            return false;
        }
        Scope closing = std::move(scopes.back());
        scopes.pop_back();
        members.pop_back();
        if (closing.kind == Scope::Kind::method && closing.unit.type_node >= 0) {
            closing.unit.end = brace.end;
            units.push_back(std::move(closing.unit));
        }
        // a field-initializer brace keeps its member accumulating toward ';'
        return true;
    }

    std::optional<std::pair<std::string, std::string>> find_type_decl(const Member& m) const {
        for (std::size_t i = 0; i < m.tokens.size(); ++i) {
            const Token& t = m.tokens[i];
            bool type_kw = t.is_word("class") || t.is_word("interface") || t.is_word("enum") ||
                           t.is_word("record") || t.kind == Tok::at_interface;
            if (!type_kw) continue;
            if (i + 1 < m.tokens.size() && m.tokens[i + 1].kind == Tok::ident &&
                !is_reserved(m.tokens[i + 1].text)) {
                std::string kw = t.kind == Tok::at_interface ? "interface" : t.text;
                return std::make_pair(kw, m.tokens[i + 1].text);
            }
        }
        return std::nullopt;
    }

    static bool is_reserved(const std::string& w) {
        static const char* words[] = {
            "class",     "interface", "enum",   "record",       "extends", "implements",
            "throws",    "void",      "static", "final",        "public",  "private",
            "protected", "abstract",  "new",    "synchronized", "if",      "for",
            "while",     "switch",    "catch",  "try",          "do",      "return",
            "else",      "native",    "default"};
        return std::any_of(std::begin(words), std::end(words),
                           [&](const char* k) { return w == k; });
    }

    std::optional<PendingUnit> match_method(const Member& m) const {
        // name '(' params ')' [throws a.b.C, D] [ '[' ']' ] then the brace
        std::size_t open = m.tokens.size();
        int depth = 0;
        for (std::size_t i = 0; i < m.tokens.size(); ++i) {
            if (m.tokens[i].is('(')) {
                if (depth == 0 && open == m.tokens.size()) open = i;
                ++depth;
            } else if (m.tokens[i].is(')')) {
                --depth;
            }
        }
        if (open == m.tokens.size() || open == 0) return std::nullopt;
        const Token& name = m.tokens[open - 1];
        if (name.kind != Tok::ident || is_reserved(name.text)) return std::nullopt;

        // find the ')' matching `open`
        std::size_t close = open;
        depth = 0;
        for (std::size_t i = open; i < m.tokens.size(); ++i) {
            if (m.tokens[i].is('(')) ++depth;
            if (m.tokens[i].is(')')) {
                --depth;
                if (depth == 0) {
                    close = i;
                    break;
                }
            }
        }
        if (close == open) return std::nullopt;
        for (std::size_t i = close + 1; i < m.tokens.size(); ++i) {
            const Token& t = m.tokens[i];
            bool ok = t.is_word("throws") || t.kind == Tok::ident || t.is('.') || t.is(',') ||
                      t.is('[') || t.is(']');
            if (!ok) return std::nullopt;
        }

        PendingUnit unit;
        unit.method_name = name.text;
        unit.param_types = parse_params(m, open, close);
        return unit;
    }

    std::vector<std::string> parse_params(const Member& m, std::size_t open, std::size_t close) const {
        std::vector<std::string> out;
        std::size_t start = open + 1;
        int depth = 0;
        auto emit = [&](std::size_t from, std::size_t to) {
            // strip annotations and 'final'
            while (from < to &&
                   (m.tokens[from].kind == Tok::annotation || m.tokens[from].is_word("final"))) {
                ++from;
            }
            if (from >= to) return;
            // the declared name is the last identifier; trailing [] belong to the type
            std::size_t name_idx = to;
            for (std::size_t i = to; i-- > from;) {
                if (m.tokens[i].kind == Tok::ident) {
                    name_idx = i;
                    break;
                }
            }
            if (name_idx == to || name_idx == from) {
                out.push_back(render_type(file.text, m.tokens, from, to));
                return;
            }
            std::string type = render_type(file.text, m.tokens, from, name_idx);
            for (std::size_t i = name_idx + 1; i < to; ++i) {
                if (m.tokens[i].is('[')) type += "[]";
            }
            out.push_back(type);
        };
        for (std::size_t i = start; i <= close; ++i) {
            if (m.tokens[i].is('(') || m.tokens[i].is('<')) ++depth;
            if (m.tokens[i].is(')') || m.tokens[i].is('>')) --depth;
            bool at_end = i == close;
            bool split = (m.tokens[i].is(',') && depth == 0) || (at_end && depth <= 0);
            if (split) {
                if (i > start) emit(start, i);
                start = i + 1;
            }
        }
        return out;
    }

    std::string_view text_span(std::size_t b, std::size_t e) const {
        b = std::min(b, file.text.size());
        e = std::min(std::max(e, b), file.text.size());
        return std::string_view(file.text).substr(b, e - b);
    }

    std::vector<int> chain_of(int node) const {
        std::vector<int> chain;
        for (int cur = node; cur >= 0; cur = types[static_cast<std::size_t>(cur)].parent) {
            chain.push_back(cur);
        }
        std::reverse(chain.begin(), chain.end());
        return chain;
    }

    std::string qualified_class_name(int node) const {
        std::string joined;
        for (int idx : chain_of(node)) {
            if (!joined.empty()) joined += "$";
            joined += types[static_cast<std::size_t>(idx)].simple_name;
        }
        if (!package_name.empty()) {
            return package_name + "." + joined;
        }
        return joined;
    }

    std::string header_for(int node) const {
        std::string header;
        auto add_line = [&](const std::string& line) {
            if (!header.empty()) header += "\n";
            header += line;
        };
        if (!package_line.empty()) add_line(package_line);
        for (const auto& imp : import_lines) add_line(imp);
        for (int idx : chain_of(node)) {
            const TypeNode& t = types[static_cast<std::size_t>(idx)];
            add_line(t.decl_line);
            for (const auto& f : t.fields) add_line(f);
        }
        return header;
    }
};

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back(sep);
        out += p;
    }
    return out;
}

} // namespace

ParseResult extract_methods(const SourceFile& file) {
    ParseResult result;
    if (file.text.empty()) {
        result.warnings.push_back({file.path, "empty file"});
        return result;
    }
    FileScan scan(file);
    if (!scan.run() || !scan.balanced) {
        result.warnings.push_back({file.path, "unbalanced braces, file skipped"});
        return result;
    }
    for (const PendingUnit& p : scan.units) {
        CodeUnit unit;
        unit.class_name = scan.qualified_class_name(p.type_node);
        unit.method_name = p.method_name;
        unit.param_types = p.param_types;
        unit.param_count = p.param_types.size();
        unit.context_header = scan.header_for(p.type_node);
        unit.body_text = file.text.substr(p.begin, p.end - p.begin);
        unit.source_path = file.path;
        unit.span_begin = p.begin;
        unit.span_end = p.end;
        unit.oversize = unit.body_text.size() > kOversizeChars;
        unit.unit_id = util::sha256_hex(file.path + '\x1f' + unit.class_name + '\x1f' +
                                        unit.method_name + '\x1f' + join(unit.param_types, ',') +
                                        '\x1f' + std::to_string(p.begin) + ':' +
                                        std::to_string(p.end))
                           .substr(0, 16);
        result.units.push_back(std::move(unit));
    }
    return result;
}

ParseResult parse_source_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw RootNotFound(root.string());
    }
    std::vector<fs::path> candidates;
    for (const auto& entry :
         fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied)) {
        if (entry.is_regular_file() && entry.path().extension() == ".java") {
            candidates.push_back(entry.path());
        }
    }
    if (candidates.empty()) {
        throw EmptyTree(root.string());
    }
    std::vector<std::pair<std::string, fs::path>> ordered;
    ordered.reserve(candidates.size());
    for (const auto& p : candidates) {
        ordered.emplace_back(fs::relative(p, root).generic_string(), p);
    }
    std::sort(ordered.begin(), ordered.end());

    ParseResult all;
    for (const auto& [rel, abs] : ordered) {
        try {
            SourceFile file{rel, util::read_file(abs)};
            ParseResult one = extract_methods(file);
            std::move(one.units.begin(), one.units.end(), std::back_inserter(all.units));
            std::move(one.warnings.begin(), one.warnings.end(), std::back_inserter(all.warnings));
        } catch (const std::exception& e) {
            all.warnings.push_back({rel, e.what()});
        }
    }
    return all;
}

std::string derive_package_name(const std::vector<CodeUnit>& units) {
    std::map<std::string, int> counts;
    for (const CodeUnit& u : units) {
        auto dot = u.class_name.rfind('.');
        if (dot == std::string::npos) continue;
        counts[u.class_name.substr(0, dot)]++;
    }
    std::string best;
    int best_count = 0;
    for (const auto& [pkg, n] : counts) {
        bool better = n > best_count ||
                      (n == best_count &&
                       (pkg.size() < best.size() || (pkg.size() == best.size() && pkg < best)));
        if (better) {
            best = pkg;
            best_count = n;
        }
    }
    return best;
}

} // namespace tracerag::splitter
