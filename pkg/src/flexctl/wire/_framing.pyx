# cython: boundscheck=False, wraparound=False
"""Compiled frame codec; byte-for-byte identical to framing_py."""
from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_FromStringAndSize, PyBytes_GET_SIZE
from libc.string cimport memcpy

from flexctl.errors import FramingError


cdef inline void _put_u32(char *dst, Py_ssize_t value):
    dst[0] = <char>((value >> 24) & 0xFF)
    dst[1] = <char>((value >> 16) & 0xFF)
    dst[2] = <char>((value >> 8) & 0xFF)
    dst[3] = <char>(value & 0xFF)


cdef inline unsigned long _get_u32(const unsigned char *src):
    return (
        (<unsigned long>src[0] << 24)
        | (<unsigned long>src[1] << 16)
        | (<unsigned long>src[2] << 8)
        | <unsigned long>src[3]
    )


def pack_frames(bytes topic, bytes header, bytes payload):
    cdef Py_ssize_t nt = PyBytes_GET_SIZE(topic)
    cdef Py_ssize_t nh = PyBytes_GET_SIZE(header)
    cdef Py_ssize_t np = PyBytes_GET_SIZE(payload)
    cdef bytes out = PyBytes_FromStringAndSize(NULL, nt + nh + np + 12)
    cdef char *dst = PyBytes_AS_STRING(out)
    _put_u32(dst, nt)
    memcpy(dst + 4, PyBytes_AS_STRING(topic), nt)
    dst += 4 + nt
    _put_u32(dst, nh)
    memcpy(dst + 4, PyBytes_AS_STRING(header), nh)
    dst += 4 + nh
    _put_u32(dst, np)
    memcpy(dst + 4, PyBytes_AS_STRING(payload), np)
    return out


def unpack_frames(bytes buf):
    cdef const unsigned char *src = <const unsigned char *>PyBytes_AS_STRING(buf)
    cdef Py_ssize_t n = PyBytes_GET_SIZE(buf)
    cdef Py_ssize_t off = 0
    cdef unsigned long length
    cdef int count = 0
    cdef list frames = []
    while off < n:
        if off + 4 > n:
            raise FramingError("truncated length prefix at offset %d" % off)
        length = _get_u32(src + off)
        off += 4
        if off + <Py_ssize_t>length > n:
            raise FramingError("truncated frame body at offset %d" % off)
        frames.append(PyBytes_FromStringAndSize(<const char *>(src + off), length))
        off += length
        count += 1
    if count != 3:
        raise FramingError("expected 3 frames, got %d" % count)
    return (frames[0], frames[1], frames[2])
