import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simalloc import trace as tr


def roundtrip(trace):
    buf = io.StringIO()
    tr.write_trace(trace, buf)
    return buf.getvalue(), tr.read_trace(io.StringIO(buf.getvalue()))


def simple_trace():
    return tr.Trace(threads=2, seed=7, rng_name="splitmix64", records=[
        tr.malloc(0, 0, 100),
        tr.access(0, 0, 2, tr.READ),
        tr.compute(1, 500),
        tr.malloc(1, 1, 64),
        tr.free(1, 1),
        tr.access(0, 0, 1, tr.WRITE),
        tr.free(0, 0),
    ])


def test_roundtrip_exact():
    text, back = roundtrip(simple_trace())
    assert back == simple_trace()
    text2, _ = roundtrip(back)
    assert text == text2


def test_header_format():
    text, _ = roundtrip(simple_trace())
    assert text.splitlines()[0] == "#SIMALLOC-TRACE v1 threads=2 seed=7 rng=splitmix64"


@pytest.mark.parametrize("header", [
    "",
    "#WRONG v1 threads=1 seed=0 rng=x",
    "#SIMALLOC-TRACE v2 threads=1 seed=0 rng=x",
    "#SIMALLOC-TRACE v1 threads=1 seed=0",
    "#SIMALLOC-TRACE v1 thread=1 seed=0 rng=x",
])
def test_bad_headers_rejected(header):
    with pytest.raises(tr.TraceFormatError) as e:
        tr.read_trace(io.StringIO(header + "\n" if header else ""))
    assert e.value.lineno == 1


@pytest.mark.parametrize("line", [
    "M 0 1", "M 0 1 64 9", "Z 0 1", "F 0", "A 0 1 2 X", "M 0 one 64", "C 0",
])
def test_bad_records_rejected(line):
    text = "#SIMALLOC-TRACE v1 threads=1 seed=0 rng=splitmix64\n" + line + "\n"
    with pytest.raises(tr.TraceFormatError) as e:
        tr.read_trace(io.StringIO(text))
    assert e.value.lineno == 2


class TestValidate:
    def ok(self, records, threads=2):
        return tr.validate(tr.Trace(threads, 0, "splitmix64", records))

    def test_valid(self):
        assert self.ok(simple_trace().records).valid

    def test_free_before_malloc(self):
        rep = self.ok([tr.free(0, 5)])
        assert not rep.valid and "free-before-malloc" in rep.errors[0][1]

    def test_double_free(self):
        rep = self.ok([tr.malloc(0, 1, 32), tr.free(0, 1), tr.free(1, 1)])
        assert [i for i, _ in rep.errors] == [2]
        assert "double free" in rep.errors[0][1]

    def test_access_after_free(self):
        rep = self.ok([tr.malloc(0, 1, 32), tr.free(0, 1), tr.access(0, 1, 1, "R")])
        assert not rep.valid and "non-live" in rep.errors[0][1]

    def test_access_wider_than_object(self):
        rep = self.ok([tr.malloc(0, 1, 65), tr.access(0, 1, 3, "R")])
        assert not rep.valid and "spans" in rep.errors[0][1]
        assert self.ok([tr.malloc(0, 1, 65), tr.access(0, 1, 2, "R")]).valid

    def test_unknown_thread(self):
        rep = self.ok([tr.malloc(2, 1, 32)])
        assert not rep.valid and "thread" in rep.errors[0][1]

    def test_object_id_reuse_after_free_is_valid(self):
        rep = self.ok([tr.malloc(0, 1, 32), tr.free(0, 1), tr.malloc(0, 1, 32)])
        assert rep.valid


record_strategy = st.one_of(
    st.builds(tr.malloc, st.integers(0, 3), st.integers(0, 20), st.integers(0, 5000)),
    st.builds(tr.free, st.integers(0, 3), st.integers(0, 20)),
    st.builds(tr.access, st.integers(0, 3), st.integers(0, 20),
              st.integers(1, 8), st.sampled_from("RW")),
    st.builds(tr.compute, st.integers(0, 3), st.integers(0, 10**6)),
)


@given(st.lists(record_strategy, max_size=60))
@settings(max_examples=150)
def test_roundtrip_any_records(records):
    # serialization is independent of semantic validity
    trace = tr.Trace(threads=4, seed=9, rng_name="splitmix64", records=records)
    text, back = roundtrip(trace)
    assert back == trace
