from setuptools import setup, find_packages

setup(
    name="blab-reporter",
    version="0.1.0",
    description="A data-to-text robot journalist that posts pt-BR reports about the Brazilian Blue Amazon",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires=">=3.12",
    install_requires=[
        "mcp>=1,<2",
        "httpx",
        "python-dotenv",
        "nltk>=3.8",
    ],
    entry_points={
        "console_scripts": [
            "blab-reporter=blab_reporter.__main__:main",
        ],
    },
)
