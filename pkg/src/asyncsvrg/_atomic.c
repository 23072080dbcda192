/* Element-atomic helpers for shared float64 buffers.
 *
 * The lock-free write scheme needs per-coordinate atomic read-modify-write
 * on a shared parameter vector.  numpy cannot express that, so this module
 * provides a CAS-loop fetch-add over any writable buffer of doubles, plus
 * an atomic fetch-add for a shared int64 update counter.
 */
#define PY_SSIZE_T_CLEAN
#include <Python.h>
#include <stdint.h>
#include <string.h>

static int
check_double_buffer(Py_buffer *b, const char *name)
{
    if (b->len % (Py_ssize_t)sizeof(double) != 0) {
        PyErr_Format(PyExc_ValueError, "%s: buffer length not a multiple of 8", name);
        return -1;
    }
    if (((uintptr_t)b->buf) % sizeof(double) != 0) {
        PyErr_Format(PyExc_ValueError, "%s: buffer not 8-byte aligned", name);
        return -1;
    }
    return 0;
}

/* axpy_atomic(target, scale, source): target[j] += scale * source[j],
 * each element updated with an atomic compare-and-swap loop. */
static PyObject *
axpy_atomic(PyObject *self, PyObject *args)
{
    Py_buffer target, source;
    double scale;

    if (!PyArg_ParseTuple(args, "w*dy*", &target, &scale, &source))
        return NULL;
    if (check_double_buffer(&target, "target") < 0 ||
        check_double_buffer(&source, "source") < 0) {
        PyBuffer_Release(&target);
        PyBuffer_Release(&source);
        return NULL;
    }
    if (target.len != source.len) {
        PyBuffer_Release(&target);
        PyBuffer_Release(&source);
        PyErr_SetString(PyExc_ValueError, "target/source length mismatch");
        return NULL;
    }

    Py_ssize_t n = target.len / (Py_ssize_t)sizeof(double);
    double *tp = (double *)target.buf;
    const double *sp = (const double *)source.buf;

    Py_BEGIN_ALLOW_THREADS
    for (Py_ssize_t j = 0; j < n; j++) {
        double add = scale * sp[j];
        if (add == 0.0)
            continue;
        uint64_t *slot = (uint64_t *)(tp + j);
        uint64_t old = __atomic_load_n(slot, __ATOMIC_RELAXED);
        for (;;) {
            double cur, upd;
            uint64_t updbits;
            memcpy(&cur, &old, sizeof(double));
            upd = cur + add;
            memcpy(&updbits, &upd, sizeof(double));
            if (__atomic_compare_exchange_n(slot, &old, updbits, 1,
                                            __ATOMIC_RELAXED, __ATOMIC_RELAXED))
                break;
        }
    }
    Py_END_ALLOW_THREADS

    PyBuffer_Release(&target);
    PyBuffer_Release(&source);
    Py_RETURN_NONE;
}

/* fetch_add_i64(counter_buffer, index, value) -> previous value */
static PyObject *
fetch_add_i64(PyObject *self, PyObject *args)
{
    Py_buffer buf;
    Py_ssize_t index;
    long long value;

    if (!PyArg_ParseTuple(args, "w*nL", &buf, &index, &value))
        return NULL;
    if (buf.len % (Py_ssize_t)sizeof(int64_t) != 0 ||
        ((uintptr_t)buf.buf) % sizeof(int64_t) != 0) {
        PyBuffer_Release(&buf);
        PyErr_SetString(PyExc_ValueError, "counter buffer must be aligned int64");
        return NULL;
    }
    Py_ssize_t n = buf.len / (Py_ssize_t)sizeof(int64_t);
    if (index < 0 || index >= n) {
        PyBuffer_Release(&buf);
        PyErr_SetString(PyExc_IndexError, "counter index out of range");
        return NULL;
    }
    int64_t *slot = (int64_t *)buf.buf + index;
    long long prev = (long long)__atomic_fetch_add(slot, (int64_t)value, __ATOMIC_RELAXED);
    PyBuffer_Release(&buf);
    return PyLong_FromLongLong(prev);
}

/* load_i64(counter_buffer, index) -> current value */
static PyObject *
load_i64(PyObject *self, PyObject *args)
{
    Py_buffer buf;
    Py_ssize_t index;

    if (!PyArg_ParseTuple(args, "w*n", &buf, &index))
        return NULL;
    if (buf.len % (Py_ssize_t)sizeof(int64_t) != 0 ||
        ((uintptr_t)buf.buf) % sizeof(int64_t) != 0) {
        PyBuffer_Release(&buf);
        PyErr_SetString(PyExc_ValueError, "counter buffer must be aligned int64");
        return NULL;
    }
    Py_ssize_t n = buf.len / (Py_ssize_t)sizeof(int64_t);
    if (index < 0 || index >= n) {
        PyBuffer_Release(&buf);
        PyErr_SetString(PyExc_IndexError, "counter index out of range");
        return NULL;
    }
    int64_t *slot = (int64_t *)buf.buf + index;
    long long cur = (long long)__atomic_load_n(slot, __ATOMIC_RELAXED);
    PyBuffer_Release(&buf);
    return PyLong_FromLongLong(cur);
}

static PyMethodDef methods[] = {
    {"axpy_atomic", axpy_atomic, METH_VARARGS,
     "axpy_atomic(target, scale, source): element-atomic target += scale*source"},
    {"fetch_add_i64", fetch_add_i64, METH_VARARGS,
     "fetch_add_i64(buffer, index, value) -> previous value"},
    {"load_i64", load_i64, METH_VARARGS,
     "load_i64(buffer, index) -> current value"},
    {NULL, NULL, 0, NULL},
};

static struct PyModuleDef moduledef = {
    PyModuleDef_HEAD_INIT, "_atomic", NULL, -1, methods,
};

PyMODINIT_FUNC
PyInit__atomic(void)
{
    return PyModule_Create(&moduledef);
}
