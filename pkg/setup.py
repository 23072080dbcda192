from setuptools import Extension, setup

setup(
    ext_modules=[
        Extension(
            "asyncsvrg._atomic",
            sources=["src/asyncsvrg/_atomic.c"],
            extra_compile_args=["-O2"],
        )
    ]
)
