"""python -m holocodec"""
from dotenv import load_dotenv

load_dotenv()

from holocodec.cli import main  # noqa: E402

if __name__ == "__main__":
    main()
