#!/usr/bin/env python
import os
import subprocess
import sys

# two-space indent, long lines
STYLE = "{based_on_style: pep8, indent_width: 2, continuation_indent_width: 2, column_limit: 200}"


def python_files(target):
  if os.path.isfile(target):
    return [target]
  return sorted(os.path.join(root, name) for root, _, names in os.walk(target) for name in names if name.endswith(".py"))


def run_yapf(files, check=False):
  changed = []
  for path in files:
    command = ["yapf", "--style", STYLE, "--diff" if check else "-i", path]
    out = subprocess.run(command, capture_output=True, text=True)
    if out.returncode not in (0, 1):
      print(f"Error formatting {path}: {out.stderr}")
    elif check and out.stdout:
      changed.append(path)
    elif not check:
      print(f"Formatted: {path}")
  return changed


def main():
  args = [a for a in sys.argv[1:] if a != "--check"]
  check = "--check" in sys.argv[1:]
  targets = args or ["gtgb2", "test"]
  changed = run_yapf([f for t in targets for f in python_files(t)], check)
  if check and changed:
    print("Would reformat:\n" + "\n".join(changed))
    sys.exit(1)
  print("Formatting completed.")


if __name__ == "__main__":
  main()
