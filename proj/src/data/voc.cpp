#include "des/data/voc.hpp"

#include <charconv>
#include <cmath>
#include <memory>

#include "des/core/error.hpp"

namespace des::data {

ClassTable make_class_table(const std::vector<std::string>& names) {
    ClassTable t;
    if (names.empty() || names.front() != "background") t.push_back("background");
    t.insert(t.end(), names.begin(), names.end());
    return t;
}

int class_index(const ClassTable& table, std::string_view name) {
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

struct Element {
    std::string name;
    std::string text;
    std::size_t line = 1;
    std::size_t offset = 0;
    std::vector<std::unique_ptr<Element>> children;

    const Element* child(std::string_view n) const {
        for (const auto& c : children) {
            if (c->name == n) return c.get();
        }
        return nullptr;
    }
};

constexpr std::size_t kMaxDepth = 64;

bool name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.' || c == ':';
}

bool space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

class XmlReader {
public:
    explicit XmlReader(std::string_view b) : b_(b) {}

    std::unique_ptr<Element> parse() {
        skip_misc();
        if (pos_ >= b_.size() || b_[pos_] != '<') fail("expected root element");
        auto root = std::make_unique<Element>();
        std::vector<Element*> stack;
        open_tag(*root, stack);
        while (!stack.empty()) {
            if (pos_ >= b_.size()) fail("unexpected end of document inside <" + stack.back()->name + ">");
            if (b_[pos_] != '<') {
                const std::size_t start = pos_;
                while (pos_ < b_.size() && b_[pos_] != '<') advance();
                append_text(*stack.back(), b_.substr(start, pos_ - start));
            } else if (starts_with("<!--")) {
                skip_comment();
            } else if (starts_with("<![CDATA[")) {
                const std::size_t end = b_.find("]]>", pos_ + 9);
                if (end == std::string_view::npos) fail("unterminated CDATA section");
                stack.back()->text.append(b_.substr(pos_ + 9, end - pos_ - 9));
                while (pos_ < end + 3) advance();
            } else if (starts_with("<?")) {
                skip_pi();
            } else if (starts_with("</")) {
                close_tag(stack);
            } else {
                if (stack.size() >= kMaxDepth) fail("elements nested too deeply");
                auto child = std::make_unique<Element>();
                Element* raw = child.get();
                stack.back()->children.push_back(std::move(child));
                open_tag(*raw, stack);
            }
        }
        skip_misc();
        if (pos_ != b_.size()) fail("content after the root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("VOC XML line " + std::to_string(line_) + ": " + what, pos_, line_);
    }

    bool starts_with(std::string_view s) const { return b_.substr(pos_, s.size()) == s; }

    void advance() {
        if (b_[pos_] == '\n') ++line_;
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < b_.size() && space(b_[pos_])) advance();
    }

    void skip_comment() {
        const std::size_t end = b_.find("-->", pos_ + 4);
        if (end == std::string_view::npos) fail("unterminated comment");
        while (pos_ < end + 3) advance();
    }

    void skip_pi() {
        const std::size_t end = b_.find("?>", pos_ + 2);
        if (end == std::string_view::npos) fail("unterminated processing instruction");
        while (pos_ < end + 2) advance();
    }

    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<?")) {
                skip_pi();
            } else if (starts_with("<!--")) {
                skip_comment();
            } else if (starts_with("<!")) {
                const std::size_t end = b_.find('>', pos_);
                if (end == std::string_view::npos) fail("unterminated declaration");
                while (pos_ <= end) advance();
            } else {
                return;
            }
        }
    }

    std::string read_name() {
        const std::size_t start = pos_;
        while (pos_ < b_.size() && name_char(b_[pos_])) advance();
        if (pos_ == start) fail("expected an element name");
        return std::string(b_.substr(start, pos_ - start));
    }

    // At '<' of a start tag. Pushes the element unless it is self-closing.
    void open_tag(Element& e, std::vector<Element*>& stack) {
        e.offset = pos_;
        e.line = line_;
        advance();
        e.name = read_name();
        for (;;) {
            skip_ws();
            if (pos_ >= b_.size()) fail("unterminated start tag <" + e.name + ">");
            if (b_[pos_] == '>') {
                advance();
                stack.push_back(&e);
                return;
            }
            if (starts_with("/>")) {
                advance();
                advance();
                return;
            }
            read_name();
            skip_ws();
            if (pos_ >= b_.size() || b_[pos_] != '=') fail("expected '=' in attribute of <" + e.name + ">");
            advance();
            skip_ws();
            if (pos_ >= b_.size() || (b_[pos_] != '"' && b_[pos_] != '\'')) fail("expected quoted attribute value");
            const char q = b_[pos_];
            advance();
            while (pos_ < b_.size() && b_[pos_] != q) advance();
            if (pos_ >= b_.size()) fail("unterminated attribute value");
            advance();
        }
    }

    void close_tag(std::vector<Element*>& stack) {
        advance();
        advance();
        const std::string name = read_name();
        skip_ws();
        if (pos_ >= b_.size() || b_[pos_] != '>') fail("unterminated end tag </" + name + ">");
        advance();
        if (name != stack.back()->name) {
            fail("end tag </" + name + "> does not match <" + stack.back()->name + "> from line " +
                 std::to_string(stack.back()->line));
        }
        stack.pop_back();
    }

    void append_text(Element& e, std::string_view raw) {
        std::size_t i = 0;
        while (i < raw.size()) {
            if (raw[i] != '&') {
                e.text.push_back(raw[i++]);
                continue;
            }
            const std::size_t semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated character reference");
            const std::string_view ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") e.text.push_back('&');
            else if (ent == "lt") e.text.push_back('<');
            else if (ent == "gt") e.text.push_back('>');
            else if (ent == "quot") e.text.push_back('"');
            else if (ent == "apos") e.text.push_back('\'');
            else fail("unknown entity &" + std::string(ent) + ";");
            i = semi + 1;
        }
    }

    std::string_view b_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && space(s.front())) s.remove_prefix(1);
    while (!s.empty() && space(s.back())) s.remove_suffix(1);
    return s;
}

const Element& require(const Element& parent, std::string_view name) {
    const Element* c = parent.child(name);
    if (!c) {
        throw ParseError("VOC XML line " + std::to_string(parent.line) + ": missing <" + std::string(name) + "> in <" +
                             parent.name + ">",
                         parent.offset, parent.line);
    }
    return *c;
}

double number(const Element& e) {
    const std::string_view t = trim(e.text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw ParseError("VOC XML line " + std::to_string(e.line) + ": <" + e.name + "> is not a number: '" +
                             std::string(t.substr(0, 32)) + "'",
                         e.offset, e.line);
    }
    return v;
}

std::size_t extent(const Element& e) {
    const double v = number(e);
    if (v < 1.0 || v > 1e6 || v != std::floor(v)) {
        throw ParseError("VOC XML line " + std::to_string(e.line) + ": <" + e.name + "> must be a positive integer",
                         e.offset, e.line);
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

VocAnnotation parse_voc_xml(std::string_view bytes, const ClassTable& classes) {
    XmlReader reader(bytes);
    const std::unique_ptr<Element> root = reader.parse();
    VocAnnotation out;
    const Element& size = require(*root, "size");
    out.width = extent(require(size, "width"));
    out.height = extent(require(size, "height"));
    if (const Element* d = size.child("depth")) out.depth = static_cast<std::size_t>(std::max(0.0, number(*d)));
    const double W = static_cast<double>(out.width), H = static_cast<double>(out.height);

    for (const auto& child : root->children) {
        if (child->name != "object") continue;
        const Element& obj = *child;
        const Element& name = require(obj, "name");
        const std::string_view cls = trim(name.text);
        const int id = class_index(classes, cls);
        if (id < 0) {
            throw ParseError("VOC XML line " + std::to_string(name.line) + ": unknown class '" +
                                 std::string(cls.substr(0, 64)) + "'",
                             name.offset, name.line);
        }
        BoundingBox b;
        b.class_id = id;
        if (const Element* d = obj.child("difficult")) b.difficult = number(*d) != 0.0;
        const Element& bb = require(obj, "bndbox");
        const double xmin = number(require(bb, "xmin")), ymin = number(require(bb, "ymin"));
        const double xmax = number(require(bb, "xmax")), ymax = number(require(bb, "ymax"));
        b.xmin = (xmin - 1.0) / W;
        b.ymin = (ymin - 1.0) / H;
        b.xmax = xmax / W;
        b.ymax = ymax / H;
        if (auto why = validate(b); !why.empty()) {
            throw InvalidInput("VOC XML line " + std::to_string(bb.line) + ": invalid <bndbox>: " + why);
        }
        if (b.xmin < 0.0 || b.ymin < 0.0 || b.xmax > 1.0 || b.ymax > 1.0) {
            throw InvalidInput("VOC XML line " + std::to_string(bb.line) + ": <bndbox> lies outside the " +
                               std::to_string(out.width) + "x" + std::to_string(out.height) + " image");
        }
        out.boxes.push_back(b);
    }
    return out;
}

}  // namespace des::data
