from setuptools import find_packages, setup

setup(
    name="phonctx",
    version="0.1.0",
    description="Phonetic retrieval-based contextualization harness for speech LLM decoding",
    packages=find_packages(include=["phonctx", "phonctx.*"]),
    python_requires=">=3.9",
    install_requires=[
        "pydantic>=2",
        "pydantic-settings",
        "numpy",
        "pandas",
        "rapidfuzz>=3",
    ],
    extras_require={"test": ["pytest", "pytest-cov"]},
    entry_points={"console_scripts": ["phonctx = phonctx.app.main:main"]},
)
