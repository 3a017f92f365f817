from src.interface.cli import runCLI

if __name__ == "__main__":
    runCLI()
