from docground.dataset import OcrToken
from docground.geometry import NormBox, iou, union_box
from docground.locator import locate, reading_order


def tok(text, x1, y1, x2, y2, page=0):
    return OcrToken(text=text, box=NormBox(x1, y1, x2, y2), page=page)


def row(texts, y, page=0, start=0.05, width=0.08, gap=0.02, height=0.02):
    out = []
    x = start
    for t in texts:
        out.append(tok(t, x, y, x + width, y + height, page=page))
        x += width + gap
    return out


def test_reading_order_left_to_right():
    a = tok("right", 0.5, 0.1, 0.6, 0.12)
    b = tok("left", 0.1, 0.1, 0.2, 0.12)
    assert [t.text for t in reading_order([a, b])] == ["left", "right"]


def test_reading_order_pages_first():
    a = tok("second", 0.1, 0.1, 0.2, 0.12, page=1)
    b = tok("first", 0.5, 0.9, 0.6, 0.92, page=0)
    assert [t.text for t in reading_order([a, b])] == ["first", "second"]


def test_reading_order_tolerates_row_jitter():
    # y-centers differ by 0.004 with heights 0.02 -> same visual row
    a = tok("B", 0.3, 0.102, 0.4, 0.122)
    b = tok("A", 0.1, 0.098, 0.2, 0.118)
    c = tok("C", 0.5, 0.1, 0.6, 0.12)
    assert [t.text for t in reading_order([a, b, c])] == ["A", "B", "C"]


def test_reading_order_separates_real_rows():
    top = row(["one", "two"], y=0.1)
    bottom = row(["three", "four"], y=0.2)
    shuffled = [bottom[1], top[1], bottom[0], top[0]]
    assert [t.text for t in reading_order(shuffled)] == ["one", "two", "three", "four"]


def test_locate_full_match_unions_run():
    tokens = row(["The", "Bailey", "Group", "Inc"], y=0.3)
    m = locate("Bailey Group", tokens)
    assert m.mode == "full"
    assert m.page == 0
    assert m.matched_span == (1, 2)
    assert m.box == union_box([tokens[1].box, tokens[2].box])
    assert iou(m.box, union_box([tokens[1].box, tokens[2].box])) == 1.0


def test_locate_normalizes_case_and_spacing():
    tokens = row(["Total:", "$512.00"], y=0.1)
    m = locate("  total:   $512.00 ", tokens)
    assert m.mode == "full"


def test_locate_first_word_fallback():
    tokens = row(["Bailey", "Partners"], y=0.1)
    m = locate("Bailey Grp", tokens)
    assert m.mode == "first_word"
    assert m.matched_span == (0, 1)
    assert m.box == tokens[0].box


def test_locate_none():
    tokens = row(["alpha", "beta"], y=0.1)
    assert locate("zebra", tokens).mode == "none"
    assert locate("zebra", tokens).box is None
    assert locate("", tokens).mode == "none"
    assert locate("   ", tokens).mode == "none"


def test_locate_prefers_first_match_in_reading_order():
    first = row(["date", "due"], y=0.1)
    second = row(["date", "due"], y=0.5)
    m = locate("date due", first + second)
    assert m.mode == "full"
    assert m.matched_span == (0, 2)
    assert m.box == union_box([first[0].box, first[1].box])


def test_locate_never_spans_pages():
    tokens = [
        tok("invoice", 0.1, 0.95, 0.3, 0.97, page=0),
        tok("total", 0.1, 0.05, 0.3, 0.07, page=1),
    ]
    m = locate("invoice total", tokens)
    # no contiguous same-page run exists; falls back to the first word
    assert m.mode == "first_word"
    assert m.page == 0


def test_locate_full_match_on_second_page():
    tokens = row(["filler"], y=0.1, page=0) + row(["grand", "total"], y=0.2, page=1)
    m = locate("grand total", tokens)
    assert m.mode == "full"
    assert m.page == 1


def test_locate_deterministic():
    tokens = row(["a", "b", "a", "b"], y=0.1)
    assert locate("a b", tokens) == locate("a b", tokens)


def test_locate_multiword_run_must_be_contiguous():
    tokens = row(["grand", "x", "total"], y=0.1)
    m = locate("grand total", tokens)
    assert m.mode == "first_word"
    assert m.matched_span == (0, 1)
